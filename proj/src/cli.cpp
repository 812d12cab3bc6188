#include "schemaprobe/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "schemaprobe/campaign.hpp"
#include "schemaprobe/digest.hpp"
#include "schemaprobe/error.hpp"
#include "schemaprobe/guardrail.hpp"
#include "schemaprobe/judge.hpp"
#include "schemaprobe/metrics.hpp"

namespace schemaprobe {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Args {
  std::string manifest;
  std::string store;
  std::string workdir;
  std::string out;
  std::string in = "-";
  std::string labels;
  std::string mode = "auto";
  std::string terms;
  std::string policy;
  std::uint64_t seed = 42;
  std::size_t sample = 0;
  bool dry_run = false;
  bool plot = false;
};

class Driver {
 public:
  Driver(const Args& a, const CliStreams& io) : a_(a), io_(io) {}

  int forge();
  int attack();
  int judge();
  int report(bool ablate);
  int guard();
  int guard_eval();
  int agreement();

 private:
  fs::path workdir() const { return a_.workdir.empty() ? fs::path() : fs::path(a_.workdir); }

  fs::path at_workdir(const std::string& p) const {
    fs::path path(p);
    if (path.is_absolute() || a_.workdir.empty()) return path;
    return workdir() / path;
  }

  const CampaignManifest& manifest() {
    if (!manifest_) {
      if (a_.manifest.empty()) throw ManifestError("--manifest", "required for this command");
      std::optional<fs::path> base;
      if (!a_.workdir.empty()) base = workdir();
      manifest_ = load_manifest(at_workdir(a_.manifest), base);
    }
    return *manifest_;
  }

  fs::path store_dir() {
    if (!a_.store.empty()) return at_workdir(a_.store);
    return manifest().output_dir / manifest().name;
  }

  void require_authorization() {
    if (!manifest().authorized_testing) {
      throw ManifestError("authorized_testing",
                          "must be set to true to acknowledge an authorized evaluation before sending prompts");
    }
  }

  // Names (never values) of credential variables that are missing.
  void require_credentials(const std::vector<ModelTarget>& targets) {
    for (const auto& t : targets) {
      if (auto var = unresolved_endpoint(t)) {
        throw ManifestError("endpoint", "model " + t.model_id + " needs environment variable " + *var);
      }
    }
    std::set<std::string> missing;
    for (const auto& t : targets) {
      if (t.auth_ref.empty()) continue;
      const char* v = std::getenv(t.auth_ref.c_str());
      if (!v || !*v) missing.insert(t.auth_ref);
    }
    if (!missing.empty()) {
      std::string names;
      for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
      throw ManifestError("auth_ref", "credential variables not set: " + names);
    }
  }

  ChatClient client() const { return ChatClient(); }

  std::optional<FlagLexicon> lexicon() {
    if (!a_.terms.empty()) return load_flag_lexicon(at_workdir(a_.terms));
    if (manifest_ && manifest_->guard_flag_terms) return load_flag_lexicon(*manifest_->guard_flag_terms);
    return FlagLexicon{};
  }

  const Args& a_;
  const CliStreams& io_;
  std::optional<CampaignManifest> manifest_;
};

int Driver::forge() {
  const auto p = plan(manifest());
  const fs::path out = a_.out.empty() ? store_dir() / "prompts" : at_workdir(a_.out);
  std::set<std::string> written;
  for (const auto& job : p.jobs) {
    auto name = job.template_id + "__" + job.task_id + "__" + std::string(to_string(job.variant)) + ".txt";
    if (!written.insert(name).second) continue;
    if (!a_.dry_run) write_file(out / name, p.prompts.at(job.key()).text);
  }
  io_.out << (a_.dry_run ? "would write " : "wrote ") << written.size() << " prompt files to " << out.string()
          << "\nplan " << p.fingerprint << " (" << p.jobs.size() << " jobs)\n";
  return kExitOk;
}

int Driver::attack() {
  require_authorization();
  const auto p = plan(manifest());
  std::vector<ModelTarget> targets;
  for (const auto& [id, t] : p.targets) targets.push_back(t);
  if (a_.dry_run) {
    io_.out << "dry run: " << p.jobs.size() << " jobs across " << p.targets.size() << " models, plan "
            << p.fingerprint << "\n";
    return kExitOk;
  }
  require_credentials(targets);
  RunStore store(store_dir());
  RunOptions opts;
  opts.concurrency = manifest().concurrency;
  opts.per_endpoint_cap = manifest().per_endpoint_cap;
  opts.cancel = io_.cancel;
  const auto s = run(p, manifest(), store, client(), opts);
  io_.out << "attack: " << s.records << "/" << s.planned << " records (" << s.executed << " sent now; ok " << s.ok
          << ", provider_blocked " << s.provider_blocked << ", failed " << s.failed << ")\nstore "
          << store.dir().string() << "\n";
  return s.complete() && s.failed == 0 ? kExitOk : kExitPartial;
}

int Driver::judge() {
  require_authorization();
  const auto& m = manifest();
  if (!m.judge) throw ManifestError("judge", "no judge configured");
  const auto policy = load_judge_policy(m.judge->policy_path, m.judge->target);
  const auto p = plan(m);
  RunStore store(store_dir());
  if (!store.has_plan()) throw StoreError("store " + store.dir().string() + " has no attack records yet");
  if (auto stored = store.plan_fingerprint(); stored != p.fingerprint) throw PlanMismatch(stored, p.fingerprint);
  if (a_.dry_run) {
    std::size_t pending = 0;
    for (const auto& r : store.load_records()) pending += (!r.verdict && r.outcome == TransportOutcome::Ok);
    io_.out << "dry run: " << pending << " records await the judge (policy " << policy.digest.substr(0, 12)
            << ")\n";
    return kExitOk;
  }
  require_credentials({m.judge->target});
  JudgeOptions opts;
  opts.concurrency = m.concurrency;
  opts.blocked_policy = m.blocked_policy;
  const auto s = judge_run(store, p.tasks, policy, client(), opts);
  io_.out << "judge: success " << s.success << ", refusal " << s.refusal << ", indeterminate " << s.indeterminate
          << ", auto-refused " << s.auto_refused << ", excluded " << s.excluded << ", already judged "
          << s.already_judged << ", errors " << s.errors << " (" << s.requests << " requests, policy "
          << policy.digest.substr(0, 12) << ")\n";
  return s.errors == 0 ? kExitOk : kExitPartial;
}

int Driver::report(bool ablate) {
  const auto& m = manifest();
  RunStore store(store_dir());
  if (!store.has_plan()) throw StoreError("store " + store.dir().string() + " holds no run");
  ReportBundle bundle;
  bundle.table = compute_asr(store.load_records(), m.blocked_policy);
  if (ablate) bundle.ablation = ablation_deltas(*bundle.table);
  bundle.plot = a_.plot;
  const fs::path out = a_.out.empty() ? store.dir() / "reports" : at_workdir(a_.out);
  if (a_.dry_run) {
    io_.out << "dry run: would write reports to " << out.string() << "\n";
    return kExitOk;
  }
  const auto files = emit_reports(bundle, out);
  const auto pooled = bundle.table->pooled(AblationVariant::Full);
  io_.out << "report: " << files.size() << " files in " << out.string();
  if (pooled.asr()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *pooled.asr());
    io_.out << "; pooled Full ASR " << buf << " (" << pooled.successes << "/" << pooled.denominator() << ")";
  }
  io_.out << "\n";
  return kExitOk;
}

int Driver::guard() {
  std::string prompt;
  if (a_.in == "-") {
    std::ostringstream ss;
    ss << io_.in.rdbuf();
    prompt = ss.str();
  } else {
    prompt = read_file(at_workdir(a_.in));
  }
  std::optional<GuardrailDecision> decision;
  bool use_model = a_.mode == "llm";
  if (a_.mode == "auto") use_model = !a_.manifest.empty() && manifest().guard && !manifest().guard->target.model_id.empty();
  if (a_.mode != "auto" && a_.mode != "llm" && a_.mode != "transcriber") {
    throw CLI::ValidationError("--mode", "must be auto, llm or transcriber");
  }
  if (use_model) {
    const auto& m = manifest();
    if (!m.guard || m.guard->target.model_id.empty()) throw ManifestError("guard.model", "llm mode needs a guard model");
    const auto policy = a_.policy.empty() ? load_guard_policy(m.guard->policy_path) : load_guard_policy(at_workdir(a_.policy));
    if (a_.dry_run) {
      io_.out << build_guard_request(prompt, policy);
      return kExitOk;
    }
    require_credentials({m.guard->target});
    decision = guard_with_model(prompt, policy, m.guard->target, client(), m.guard_max_prompt_chars);
  } else {
    if (!a_.manifest.empty()) manifest();
    decision = guard_transcriber_only(prompt, *lexicon());
  }
  io_.out << decision->to_json().dump(2) << "\n";
  return decision->overall == GuardFlag::Harmful ? kExitHarmful : kExitOk;
}

int Driver::guard_eval() {
  const auto& m = manifest();
  const auto p = plan(m);
  const bool use_model = a_.mode == "llm" || (a_.mode == "auto" && m.guard && !m.guard->target.model_id.empty());
  std::optional<GuardPolicy> policy;
  if (use_model) {
    require_authorization();
    if (!m.guard || m.guard->target.model_id.empty()) throw ManifestError("guard.model", "llm mode needs a guard model");
    policy = load_guard_policy(m.guard->policy_path);
    if (!a_.dry_run) require_credentials({m.guard->target});
  }
  const auto lex = lexicon();

  // One prompt per (template, task, variant), whatever the model list.
  std::map<std::tuple<std::string, std::string, AblationVariant>, const PlannedPrompt*> prompts;
  for (const auto& job : p.jobs) prompts.emplace(std::make_tuple(job.template_id, job.task_id, job.variant), &p.prompts.at(job.key()));
  if (a_.dry_run) {
    io_.out << "dry run: " << prompts.size() << " prompts would be screened\n";
    return kExitOk;
  }

  const fs::path out = a_.out.empty() ? store_dir() / "guard_eval" : at_workdir(a_.out);
  std::vector<GuardrailDecision> positives, negatives;
  std::string log;
  const auto c = client();
  for (const auto& [key, prompt] : prompts) {
    if (io_.cancel && io_.cancel->load()) return kExitPartial;
    const auto& [tpl, task_id, variant] = key;
    auto d = use_model ? guard_with_model(prompt->text, *policy, m.guard->target, c, m.guard_max_prompt_chars)
                       : guard_transcriber_only(prompt->text, *lex);
    const auto label = p.tasks.find(task_id)->label;
    ojson line;
    line["template_id"] = tpl;
    line["task_id"] = task_id;
    line["variant"] = std::string(to_string(variant));
    line["label"] = std::string(to_string(label));
    line["prompt_fingerprint"] = prompt->fingerprint;
    line["overall"] = std::string(to_string(d.overall));
    line["flagged_fragments"] = d.flagged_count();
    line["fragments"] = d.fragments.size();
    if (d.fail_closed) line["fail_closed_reason"] = d.reason;
    log += line.dump() + "\n";
    (label == TaskLabel::Positive ? positives : negatives).push_back(std::move(d));
  }
  ReportBundle bundle;
  bundle.guard = evaluate_guardrail(positives, negatives);
  write_file(out / "decisions.jsonl", log);
  emit_reports(bundle, out);
  const auto& g = *bundle.guard;
  io_.out << "guard-eval: flagged " << g.flagged_positives << "/" << g.positives << " positives, "
          << g.flagged_negatives << "/" << g.negatives << " negatives, fail-closed " << g.fail_closed
          << "\nreports in " << out.string() << "\n";
  return kExitOk;
}

int Driver::agreement() {
  RunStore store(store_dir());
  const auto records = store.load_records();
  if (a_.sample > 0) {
    const auto keys = sample_for_review(records, a_.sample, a_.seed);
    std::string csv = "record_key,label\n";
    for (const auto& k : keys) csv += to_string(k) + ",\n";
    const fs::path out = a_.out.empty() ? store.dir() / "review_sample.csv" : at_workdir(a_.out);
    if (!a_.dry_run) write_file(out, csv);
    io_.out << "sampled " << keys.size() << " records with seed " << a_.seed << " to " << out.string() << "\n";
    return kExitOk;
  }
  if (a_.labels.empty()) throw CLI::ValidationError("--labels", "required unless --sample is given");
  const auto rep = compute_agreement(records, load_human_labels(at_workdir(a_.labels)));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", rep.agreement_rate);
  io_.out << "agreement: " << rep.n_agree << "/" << rep.n_reviewed << " = " << buf << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, const CliStreams& io) {
  Args a;
  CLI::App app{"schemaprobe: red-team evaluation harness for schema-driven prompts"};
  app.require_subcommand(1, 1);
  app.add_option("--manifest", a.manifest, "campaign manifest (JSON)");
  app.add_option("--store", a.store, "run directory (default: <output_dir>/<name>)");
  app.add_option("--workdir", a.workdir, "base directory for relative paths");
  app.add_option("--seed", a.seed, "seed for review sampling");
  app.add_flag("--dry-run", a.dry_run, "plan only; never open a network connection");

  auto* forge = app.add_subcommand("forge", "render prompts to files without sending them");
  forge->add_option("--out", a.out, "output directory");
  auto* attack = app.add_subcommand("attack", "run (or resume) the attack phase");
  auto* judge = app.add_subcommand("judge", "judge stored responses");
  auto* report = app.add_subcommand("report", "write ASR grid and summary");
  auto* ablate = app.add_subcommand("ablate", "write ASR reports with ablation deltas");
  for (auto* sc : {report, ablate}) {
    sc->add_option("--out", a.out, "report directory");
    sc->add_flag("--plot", a.plot, "also write plot descriptions");
  }
  auto* guard = app.add_subcommand("guard", "screen one prompt; exit 0 benign, 1 harmful, 3 error");
  guard->add_option("--in", a.in, "prompt file, or - for standard input");
  auto* guard_eval = app.add_subcommand("guard-eval", "screen every planned prompt and score the guardrail");
  guard_eval->add_option("--out", a.out, "output directory");
  for (auto* sc : {guard, guard_eval}) {
    sc->add_option("--mode", a.mode, "auto, llm or transcriber")->check(CLI::IsMember({"auto", "llm", "transcriber"}));
    sc->add_option("--terms", a.terms, "flag term list for transcriber mode");
  }
  guard->add_option("--policy", a.policy, "guard policy file (overrides the manifest)");
  auto* agreement = app.add_subcommand("agreement", "compare verdicts with human labels");
  agreement->add_option("--labels", a.labels, "label file with record_key,label columns");
  agreement->add_option("--sample", a.sample, "write a review sample of this many keys instead");
  agreement->add_option("--out", a.out, "sample file path");
  for (auto* sc : app.get_subcommands({})) sc->fallthrough();

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();
  const bool is_guard_cmd = std::find(argv.begin(), argv.end(), "guard") != argv.end();
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    io.out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    io.err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  Driver d(a, io);
  try {
    if (forge->parsed()) return d.forge();
    if (attack->parsed()) return d.attack();
    if (judge->parsed()) return d.judge();
    if (report->parsed()) return d.report(false);
    if (ablate->parsed()) return d.report(true);
    if (guard->parsed()) return d.guard();
    if (guard_eval->parsed()) return d.guard_eval();
    if (agreement->parsed()) return d.agreement();
  } catch (const CLI::ValidationError& e) {
    io.err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ManifestError& e) {
    io.err << "manifest error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PlanMismatch& e) {
    io.err << "plan mismatch: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    io.err << e.kind() << ": " << e.what() << "\n";
    if (is_guard_cmd) return kExitConfig;
    if (e.kind() == "UnjudgedRecords") return kExitPartial;
    return kExitHarmful;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return is_guard_cmd ? kExitConfig : kExitHarmful;
  }
  return kExitUsage;
}

}  // namespace schemaprobe
