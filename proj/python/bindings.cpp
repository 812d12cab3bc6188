#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "schemaprobe/campaign.hpp"
#include "schemaprobe/cli.hpp"
#include "schemaprobe/error.hpp"
#include "schemaprobe/forge.hpp"
#include "schemaprobe/guardrail.hpp"
#include "schemaprobe/judge.hpp"
#include "schemaprobe/metrics.hpp"
#include "schemaprobe/schema.hpp"
#include "schemaprobe/transcriber.hpp"

namespace py = pybind11;
using namespace schemaprobe;
using json = nlohmann::ordered_json;

namespace {

json fragment_json(const Fragment& f) {
  json j{{"text", f.text}, {"kind", std::string(to_string(f.kind))}, {"begin", f.span.begin}, {"end", f.span.end}};
  if (f.unterminated) j["unterminated"] = true;
  return j;
}

TrojanSchema schema_or_core(const std::optional<std::string>& spec) {
  return spec ? parse_schema_spec(*spec) : core_task_schema();
}

HarmCategory category_of(const std::string& name) {
  auto c = parse_category(name);
  if (!c) throw UnknownCategory(name);
  return *c;
}

AblationVariant variant_of(const std::string& name) {
  auto v = parse_variant(name);
  if (!v) throw Error("InvalidVariant", "unknown variant: " + name);
  return *v;
}

std::string transcribe(const std::string& text) {
  json out = json::array();
  for (const auto& f : transcribe_literals(text)) out.push_back(fragment_json(f));
  return out.dump();
}

std::string compose_prompt(const std::string& template_json, const std::optional<std::string>& schema_spec,
                           const std::string& task_id, const std::string& category, const std::string& goal,
                           int steps, const std::string& variant) {
  const auto t = parse_template(template_json);
  const AttackTask task{task_id, category_of(category), goal, TaskLabel::Positive};
  const auto p = compose(t, schema_or_core(schema_spec), task, steps, variant_of(variant));
  return json{{"template_id", p.template_id}, {"task_id", p.task_id}, {"variant", std::string(to_string(p.variant))},
              {"steps", p.steps}, {"text", p.text}, {"fingerprint", p.fingerprint}}
      .dump();
}

std::string verdict(const std::string& text) {
  const auto v = parse_verdict(text);
  json j{{"value", std::string(to_string(v.value))}, {"reasoning_excerpt", v.reasoning_excerpt}};
  if (!v.reason.empty()) j["reason"] = v.reason;
  return j.dump();
}

std::string guard_output(const std::string& reply) { return parse_guard_output(reply).to_json().dump(); }

std::string guard_transcriber(const std::string& prompt, const std::vector<std::string>& terms) {
  std::string text;
  for (const auto& t : terms) text += t + "\n";
  return guard_transcriber_only(prompt, parse_flag_lexicon(text)).to_json().dump();
}

std::string guard_metrics(std::size_t positives, std::size_t flagged_positives, std::size_t negatives,
                          std::size_t flagged_negatives) {
  ReportBundle b;
  b.guard = guard_metrics_from_counts(positives, flagged_positives, negatives, flagged_negatives);
  return summary_json(b)["guard"].dump();
}

std::string store_summary(const std::string& store_dir, const std::string& blocked, bool ablation) {
  BlockedPolicy policy = BlockedPolicy::CountAsRefusal;
  if (blocked == "exclude") policy = BlockedPolicy::Exclude;
  else if (blocked != "refusal") throw Error("InvalidPolicy", "blocked policy must be refusal or exclude");
  ReportBundle b;
  b.table = compute_asr(RunStore(store_dir).load_records(), policy);
  if (ablation) b.ablation = ablation_deltas(*b.table);
  return summary_json(b).dump();
}

std::size_t planned_jobs(const std::string& manifest_path) { return plan(load_manifest(manifest_path)).jobs.size(); }

py::tuple cli(const std::vector<std::string>& args, const std::string& stdin_text) {
  std::ostringstream out, err;
  std::istringstream in(stdin_text);
  std::vector<std::string> argv{"schemaprobe"};
  argv.insert(argv.end(), args.begin(), args.end());
  int code;
  {
    py::gil_scoped_release release;
    code = run_cli(argv, {out, err, in, nullptr});
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "schemaprobe core operations; structured results are JSON text";

  static py::exception<Error> error_type(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::tuple args = py::make_tuple(e.kind(), std::string(e.what()));
      PyErr_SetObject(error_type.ptr(), args.ptr());
    }
  });

  m.def("transcribe_literals", &transcribe, py::arg("text"));
  m.def("unescape_literal", [](const std::string& raw) { return unescape_literal(raw); }, py::arg("raw"));
  m.def(
      "render_schema_snippet",
      [](const std::optional<std::string>& spec, int steps, const std::string& task) {
        return render_schema_snippet(schema_or_core(spec), steps, task);
      },
      py::arg("schema_spec"), py::arg("steps"), py::arg("task"));
  m.def(
      "render_schema_spec", [](const std::optional<std::string>& spec) { return render_schema_spec(schema_or_core(spec)); },
      py::arg("schema_spec"));
  m.def("compose", &compose_prompt, py::arg("template_json"), py::arg("schema_spec"), py::arg("task_id"),
        py::arg("category"), py::arg("goal"), py::arg("steps"), py::arg("variant"));
  m.def("parse_verdict", &verdict, py::arg("text"));
  m.def("parse_guard_output", &guard_output, py::arg("reply"));
  m.def("guard_transcriber_only", &guard_transcriber, py::arg("prompt"), py::arg("terms"));
  m.def("guard_metrics", &guard_metrics, py::arg("positives"), py::arg("flagged_positives"), py::arg("negatives"),
        py::arg("flagged_negatives"));
  m.def("store_summary", &store_summary, py::arg("store_dir"), py::arg("blocked"), py::arg("ablation"));
  m.def("planned_jobs", &planned_jobs, py::arg("manifest_path"));
  m.def("run_cli", &cli, py::arg("args"), py::arg("stdin_text"));
}
