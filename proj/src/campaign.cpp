#include "schemaprobe/campaign.hpp"

#include <algorithm>
#include <cstdlib>
#include <memory>
#include <semaphore>
#include <set>
#include <thread>

#include "schemaprobe/digest.hpp"
#include "schemaprobe/error.hpp"

namespace schemaprobe {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Replaces each ${NAME} with the environment variable's value. Unset
// variables stay as written; unresolved_endpoint() reports them before
// anything is sent.
std::string expand_env(const std::string& s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto open = s.find("${", i);
    if (open == std::string::npos) break;
    auto close = s.find('}', open);
    if (close == std::string::npos) break;
    out.append(s, i, open - i);
    const auto name = s.substr(open + 2, close - open - 2);
    const char* value = std::getenv(name.c_str());
    out += value ? std::string(value) : s.substr(open, close - open + 1);
    i = close + 1;
  }
  out.append(s, i);
  return out;
}

ModelTarget parse_target(const ojson& j, const std::string& field) {
  if (!j.is_object()) throw ManifestError(field, "must be an object");
  ModelTarget t;
  try {
    t.model_id = j.at("model_id").get<std::string>();
    t.provider_label = j.value("provider", "");
    t.tier = j.value("tier", 1);
    t.endpoint_url = expand_env(j.at("endpoint").get<std::string>());
    t.auth_ref = j.value("auth_ref", "");
    if (j.contains("params")) {
      const auto& p = j["params"];
      t.params.temperature = p.value("temperature", t.params.temperature);
      t.params.seed = p.value("seed", t.params.seed);
      t.params.max_tokens = p.value("max_tokens", t.params.max_tokens);
    }
  } catch (const ojson::exception& e) {
    throw ManifestError(field, e.what());
  }
  if (unresolved_endpoint(t)) return t;
  if (auto problem = target_problem(t)) throw ManifestError(field, *problem);
  return t;
}

std::vector<std::string> string_array(const ojson& doc, const char* key) {
  std::vector<std::string> out;
  if (!doc.contains(key)) return out;
  if (!doc[key].is_array()) throw ManifestError(key, "must be a list");
  for (const auto& v : doc[key]) {
    if (!v.is_string()) throw ManifestError(key, "entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

ModelRole parse_role(const ojson& j, const std::string& field, const fs::path& base, bool model_required) {
  ModelRole role;
  if (j.contains("model")) role.target = parse_target(j["model"], field + ".model");
  else if (model_required) throw ManifestError(field + ".model", "missing");
  if (!j.contains("policy") || !j["policy"].is_string()) throw ManifestError(field + ".policy", "missing path");
  role.policy_path = resolve(base, j["policy"].get<std::string>());
  return role;
}

struct CountingGate {
  explicit CountingGate(int n) : sem(n) {}
  std::counting_semaphore<> sem;
};

}  // namespace

std::optional<std::string> unresolved_endpoint(const ModelTarget& t) {
  auto open = t.endpoint_url.find("${");
  if (open == std::string::npos) return std::nullopt;
  auto close = t.endpoint_url.find('}', open);
  return t.endpoint_url.substr(open + 2, close == std::string::npos ? std::string::npos : close - open - 2);
}

std::vector<std::string> manifest_problems(const CampaignManifest& m) {
  std::vector<std::string> p;
  if (m.name.empty()) p.push_back("name: empty");
  if (m.models.empty()) p.push_back("models: no model targets");
  if (m.task_sets.empty()) p.push_back("task_sets: none listed");
  if (m.template_paths.empty()) p.push_back("templates: none listed");
  if (m.variants.empty()) p.push_back("variants: none listed");
  if (m.steps < 1) p.push_back("steps: must be >= 1");
  if (m.concurrency < 1) p.push_back("concurrency: must be >= 1");
  if (m.per_endpoint_cap < 0) p.push_back("per_endpoint_cap: must be >= 0");
  std::set<std::string> ids;
  for (const auto& t : m.models) {
    if (!ids.insert(t.model_id).second) p.push_back("models: duplicate model_id " + t.model_id);
  }
  return p;
}

CampaignManifest parse_manifest(std::string_view text, const fs::path& base) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ManifestError("(document)", e.what());
  }
  if (!doc.is_object()) throw ManifestError("(document)", "must be an object");

  CampaignManifest m;
  m.raw = doc;
  try {
    m.name = doc.value("name", "");
    m.authorized_testing = doc.value("authorized_testing", false);
    if (doc.contains("models")) {
      std::size_t i = 0;
      for (const auto& t : doc["models"]) m.models.push_back(parse_target(t, "models[" + std::to_string(i++) + "]"));
    }
    if (doc.contains("task_sets")) {
      for (const auto& ts : doc["task_sets"]) {
        TaskSetRef ref;
        if (ts.is_string()) {
          ref.path = resolve(base, ts.get<std::string>());
        } else {
          ref.path = resolve(base, ts.at("path").get<std::string>());
          auto label = ts.value("label", "positive");
          if (label == "positive") ref.label = TaskLabel::Positive;
          else if (label == "borderline-benign") ref.label = TaskLabel::BorderlineBenign;
          else throw ManifestError("task_sets.label", "unknown label '" + label + "'");
        }
        m.task_sets.push_back(std::move(ref));
      }
    }
    if (doc.contains("category_aliases")) {
      for (const auto& [alias, canon] : doc["category_aliases"].items()) {
        auto c = parse_category(canon.get<std::string>());
        if (!c) throw ManifestError("category_aliases", "unknown category '" + canon.get<std::string>() + "'");
        m.category_aliases.emplace(alias, *c);
      }
    }
    for (const auto& p : string_array(doc, "schemas")) m.schema_paths.push_back(resolve(base, p));
    for (const auto& p : string_array(doc, "templates")) m.template_paths.push_back(resolve(base, p));
    if (doc.contains("variants")) {
      m.variants.clear();
      for (const auto& v : string_array(doc, "variants")) {
        auto parsed = parse_variant(v);
        if (!parsed) throw ManifestError("variants", "unknown variant '" + v + "'");
        m.variants.push_back(*parsed);
      }
    }
    if (doc.contains("pairing")) {
      auto p = parse_pairing(doc["pairing"].get<std::string>());
      if (!p) throw ManifestError("pairing", "must be by-category or all-pairs");
      m.pairing = *p;
    }
    m.steps = doc.value("steps", kDefaultSteps);
    m.concurrency = doc.value("concurrency", 1);
    m.per_endpoint_cap = doc.value("per_endpoint_cap", 0);
    m.output_dir = resolve(base, doc.value("output_dir", std::string("runs")));
    auto blocked = doc.value("provider_blocked", std::string("refusal"));
    if (blocked == "refusal") m.blocked_policy = BlockedPolicy::CountAsRefusal;
    else if (blocked == "exclude") m.blocked_policy = BlockedPolicy::Exclude;
    else throw ManifestError("provider_blocked", "must be refusal or exclude");
    if (doc.contains("judge")) m.judge = parse_role(doc["judge"], "judge", base, true);
    if (doc.contains("guard")) {
      const auto& g = doc["guard"];
      m.guard = parse_role(g, "guard", base, false);
      if (!g.contains("model")) m.guard->target.model_id.clear();
      if (g.contains("flag_terms")) m.guard_flag_terms = resolve(base, g["flag_terms"].get<std::string>());
      m.guard_max_prompt_chars = g.value("max_prompt_chars", m.guard_max_prompt_chars);
    }
  } catch (const ojson::exception& e) {
    throw ManifestError("(document)", e.what());
  }
  if (auto problems = manifest_problems(m); !problems.empty()) {
    const auto& first = problems.front();
    auto colon = first.find(':');
    throw ManifestError(first.substr(0, colon), first.substr(colon + 2));
  }
  return m;
}

CampaignManifest load_manifest(const fs::path& path, std::optional<fs::path> workdir) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ManifestError("(file)", e.what());
  }
  fs::path base = workdir ? *workdir : path.parent_path();
  if (base.empty()) base = ".";
  return parse_manifest(text, base);
}

ojson Plan::to_json() const {
  ojson jobs_json = ojson::array();
  for (const auto& j : jobs) {
    jobs_json.push_back({{"model_id", j.model_id},
                         {"template_id", j.template_id},
                         {"variant", std::string(to_string(j.variant))},
                         {"task_id", j.task_id},
                         {"steps", j.steps},
                         {"prompt_fingerprint", prompts.at(j.key()).fingerprint}});
  }
  return {{"plan_fingerprint", fingerprint}, {"job_count", jobs.size()}, {"jobs", std::move(jobs_json)}};
}

Plan plan(const CampaignManifest& m) {
  if (auto problems = manifest_problems(m); !problems.empty()) {
    const auto& first = problems.front();
    auto colon = first.find(':');
    throw ManifestError(first.substr(0, colon), first.substr(colon + 2));
  }
  Plan p;

  for (const auto& path : m.schema_paths) {
    try {
      auto s = load_schema_file(path.string());
      if (!p.schemas.emplace(s.id, s).second) throw ManifestError("schemas", "duplicate schema id " + s.id);
    } catch (const ManifestError&) {
      throw;
    } catch (const Error& e) {
      throw ManifestError("schemas", path.string() + ": " + e.what());
    }
  }
  for (const auto& path : m.template_paths) {
    try {
      auto t = load_template_file(path.string());
      if (!p.schemas.count(t.schema_ref)) {
        throw ManifestError("templates", t.id + " references unknown schema " + t.schema_ref);
      }
      if (std::any_of(p.templates.begin(), p.templates.end(), [&](const auto& o) { return o.id == t.id; })) {
        throw ManifestError("templates", "duplicate template id " + t.id);
      }
      p.templates.push_back(std::move(t));
    } catch (const ManifestError&) {
      throw;
    } catch (const Error& e) {
      throw ManifestError("templates", path.string() + ": " + e.what());
    }
  }

  std::string digests;
  for (const auto& ref : m.task_sets) {
    TaskSet ts;
    try {
      ts = load_task_set(ref.path, ref.label, m.category_aliases);
    } catch (const Error& e) {
      throw ManifestError("task_sets", ref.path.string() + ": " + e.what());
    }
    for (auto& t : ts.tasks) {
      if (p.tasks.find(t.id)) throw ManifestError("task_sets", "task id " + t.id + " appears in two task sets");
      p.tasks.tasks.push_back(std::move(t));
    }
    digests += ts.source_digest;
  }
  if (p.tasks.tasks.empty()) throw ManifestError("task_sets", "no tasks to run");
  p.tasks.name = m.name;
  p.tasks.source_digest = sha256_hex(digests);

  for (const auto& t : m.models) p.targets.emplace(t.model_id, t);

  try {
    p.jobs = cross_product(p.tasks, p.templates, m.models, m.variants, m.pairing, m.steps);
  } catch (const MissingTemplateForCategory& e) {
    throw ManifestError("templates", e.what());
  }

  // Prompts do not depend on the model, so compose once per (template, task, variant).
  std::map<std::tuple<std::string, std::string, AblationVariant>, PlannedPrompt> composed;
  ojson canon = ojson::array();
  for (const auto& job : p.jobs) {
    auto ck = std::make_tuple(job.template_id, job.task_id, job.variant);
    auto it = composed.find(ck);
    if (it == composed.end()) {
      const auto& tpl = *std::find_if(p.templates.begin(), p.templates.end(),
                                      [&](const auto& t) { return t.id == job.template_id; });
      try {
        auto cp = compose(tpl, p.schemas.at(tpl.schema_ref), *p.tasks.find(job.task_id), job.steps, job.variant);
        it = composed.emplace(ck, PlannedPrompt{cp.text, cp.fingerprint}).first;
      } catch (const Error& e) {
        throw ManifestError("templates", e.what());
      }
    }
    p.prompts.emplace(job.key(), it->second);
    const auto& target = p.targets.at(job.model_id);
    canon.push_back({to_string(job.key()), job.steps, it->second.fingerprint, target.tier,
                     target.params.temperature, target.params.seed, target.params.max_tokens});
  }
  p.fingerprint = sha256_hex(canon.dump());
  return p;
}

RunSummary summarize(const Plan& plan, const RunStore& store) {
  RunSummary s;
  s.planned = plan.jobs.size();
  std::set<JobKey> planned;
  for (const auto& j : plan.jobs) planned.insert(j.key());
  for (const auto& r : store.load_records()) {
    if (!planned.count(r.key)) continue;
    ++s.records;
    switch (r.outcome) {
      case TransportOutcome::Ok: ++s.ok; break;
      case TransportOutcome::ProviderBlocked: ++s.provider_blocked; break;
      case TransportOutcome::Failed: ++s.failed; break;
    }
  }
  return s;
}

namespace {

RunSummary execute(const Plan& plan, RunStore& store, const ChatClient& client, const RunOptions& options) {
  const auto done = store.completion_index();
  std::vector<const PromptJob*> pending;
  for (const auto& j : plan.jobs) {
    if (!done.count(j.key())) pending.push_back(&j);
  }

  const int workers = std::max(1, std::min<int>(options.concurrency, static_cast<int>(pending.size())));
  const int cap = options.per_endpoint_cap > 0 ? options.per_endpoint_cap : workers;
  std::map<std::string, std::unique_ptr<CountingGate>> gates;
  for (const auto& [id, t] : plan.targets) {
    if (!gates.count(t.endpoint_url)) gates.emplace(t.endpoint_url, std::make_unique<CountingGate>(cap));
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> executed{0};
  std::mutex error_mu;
  std::exception_ptr store_failure;

  auto worker = [&] {
    for (;;) {
      if (options.cancel && options.cancel->load()) return;
      {
        std::lock_guard lock(error_mu);
        if (store_failure) return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const PromptJob& job = *pending[i];
      const ModelTarget& target = plan.targets.at(job.model_id);
      const PlannedPrompt& prompt = plan.prompts.at(job.key());

      AttackRecord rec;
      rec.key = job.key();
      rec.category = plan.tasks.find(job.task_id)->category;
      rec.tier = target.tier;
      rec.steps = job.steps;
      rec.prompt_fingerprint = prompt.fingerprint;
      rec.timing.started_at = utc_now_iso();
      {
        auto& gate = gates.at(target.endpoint_url)->sem;
        gate.acquire();
        try {
          rec.response = client.send_single_turn(target, prompt.text);
        } catch (const TransportError& e) {
          rec.response = {};
          rec.response.finish_reason = FinishReason::Error;
          rec.response.attempt_count = e.attempts();
          rec.response.raw_status = e.last_status();
          rec.error = e.kind() + ": " + e.what();
        } catch (const Error& e) {
          rec.response = {};
          rec.response.finish_reason = FinishReason::Error;
          rec.response.attempt_count = 1;
          rec.error = e.kind() + ": " + e.what();
        }
        gate.release();
      }
      rec.timing.finished_at = utc_now_iso();
      rec.timing.latency_ms = rec.response.latency_ms;
      rec.outcome = classify_outcome(rec.response);
      try {
        store.append_record(rec);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!store_failure) store_failure = std::current_exception();
        return;
      }
      ++executed;
      if (options.on_record) options.on_record(rec);
    }
  };

  std::vector<std::thread> threads;
  for (int w = 1; w < workers; ++w) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (store_failure) std::rethrow_exception(store_failure);

  auto summary = summarize(plan, store);
  summary.executed = executed.load();
  return summary;
}

}  // namespace

RunSummary run(const Plan& plan, const CampaignManifest& manifest, RunStore& store, const ChatClient& client,
               const RunOptions& options) {
  if (store.has_plan()) {
    if (auto stored = store.plan_fingerprint(); stored != plan.fingerprint) throw PlanMismatch(stored, plan.fingerprint);
  } else {
    store.write_plan(manifest.raw, plan.to_json());
  }
  return execute(plan, store, client, options);
}

RunSummary resume(const Plan& plan, const CampaignManifest& manifest, RunStore& store, const ChatClient& client,
                  const RunOptions& options) {
  if (!store.has_plan()) throw StoreError("store " + store.dir().string() + " holds no plan to resume");
  return run(plan, manifest, store, client, options);
}

}  // namespace schemaprobe
