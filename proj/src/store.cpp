#include "schemaprobe/store.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "schemaprobe/digest.hpp"
#include "schemaprobe/error.hpp"

namespace schemaprobe {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string_view to_string(VerdictValue v) {
  switch (v) {
    case VerdictValue::Success: return "Success";
    case VerdictValue::Refusal: return "Refusal";
    case VerdictValue::Indeterminate: return "Indeterminate";
  }
  return "Indeterminate";
}

std::optional<VerdictValue> parse_verdict_value(std::string_view s) {
  if (s == "Success" || s == "True") return VerdictValue::Success;
  if (s == "Refusal" || s == "False") return VerdictValue::Refusal;
  if (s == "Indeterminate") return VerdictValue::Indeterminate;
  return std::nullopt;
}

std::string utc_now_iso() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

namespace {

ojson key_json(const JobKey& k) {
  return {{"model_id", k.model_id},
          {"template_id", k.template_id},
          {"variant", std::string(to_string(k.variant))},
          {"task_id", k.task_id}};
}

JobKey key_from_json(const ojson& j) {
  auto v = parse_variant(j.at("variant").get<std::string>());
  if (!v) throw StoreError("bad variant in record key");
  return {j.at("model_id").get<std::string>(), j.at("template_id").get<std::string>(), *v,
          j.at("task_id").get<std::string>()};
}

ojson timing_json(const Timing& t) {
  return {{"started_at", t.started_at}, {"finished_at", t.finished_at}, {"latency_ms", t.latency_ms}};
}

Timing timing_from_json(const ojson& j) {
  Timing t;
  if (!j.is_object()) return t;
  t.started_at = j.value("started_at", "");
  t.finished_at = j.value("finished_at", "");
  t.latency_ms = j.value("latency_ms", 0.0);
  return t;
}

Verdict verdict_from_json(const ojson& j) {
  Verdict v;
  auto value = parse_verdict_value(j.at("value").get<std::string>());
  if (!value) throw StoreError("bad verdict value");
  v.value = *value;
  v.reason = j.value("reason", "");
  v.reasoning_excerpt = j.value("reasoning_excerpt", "");
  v.judge_fingerprint = j.value("judge_fingerprint", "");
  v.asks = j.value("asks", 0);
  v.source = j.value("source", "judge");
  return v;
}

// Drops a torn final line so the next append starts on a fresh line.
void repair_tail(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return;
  const std::string data = read_file(path);
  if (data.empty() || data.back() == '\n') return;
  const auto last_nl = data.rfind('\n');
  fs::resize_file(path, last_nl == std::string::npos ? 0 : last_nl + 1);
}

}  // namespace

ojson to_json(const AttackRecord& r) {
  ojson resp = {{"text", r.response.text},
                {"finish_reason", std::string(to_string(r.response.finish_reason))},
                {"attempt_count", r.response.attempt_count},
                {"raw_status", r.response.raw_status}};
  ojson j = {{"key", key_json(r.key)},
             {"category", std::string(to_string(r.category))},
             {"tier", r.tier},
             {"steps", r.steps},
             {"prompt_fingerprint", r.prompt_fingerprint},
             {"outcome", std::string(to_string(r.outcome))},
             {"response", std::move(resp)}};
  if (!r.error.empty()) j["error"] = r.error;
  j["timing"] = timing_json(r.timing);
  return j;
}

AttackRecord record_from_json(const ojson& j) {
  AttackRecord r;
  r.key = key_from_json(j.at("key"));
  auto cat = parse_category(j.at("category").get<std::string>());
  if (!cat) throw StoreError("bad category in record");
  r.category = *cat;
  r.tier = j.value("tier", 1);
  r.steps = j.value("steps", kDefaultSteps);
  r.prompt_fingerprint = j.value("prompt_fingerprint", "");
  auto outcome = parse_outcome(j.at("outcome").get<std::string>());
  if (!outcome) throw StoreError("bad outcome in record");
  r.outcome = *outcome;
  const auto& resp = j.at("response");
  r.response.text = resp.value("text", "");
  auto fr = parse_finish_reason(resp.value("finish_reason", "error"));
  r.response.finish_reason = fr.value_or(FinishReason::Error);
  r.response.attempt_count = resp.value("attempt_count", 0);
  r.response.raw_status = resp.value("raw_status", 0);
  r.error = j.value("error", "");
  if (j.contains("timing")) r.timing = timing_from_json(j["timing"]);
  r.response.latency_ms = r.timing.latency_ms;
  return r;
}

ojson verdict_to_json(const JobKey& key, const Verdict& v, const Timing& t) {
  ojson j = {{"key", key_json(key)}, {"value", std::string(to_string(v.value))}};
  if (!v.reason.empty()) j["reason"] = v.reason;
  j["reasoning_excerpt"] = v.reasoning_excerpt;
  j["judge_fingerprint"] = v.judge_fingerprint;
  j["asks"] = v.asks;
  j["source"] = v.source;
  j["timing"] = timing_json(t);
  return j;
}

std::vector<ojson> read_jsonl(const fs::path& path) {
  std::vector<ojson> out;
  std::error_code ec;
  if (!fs::exists(path, ec)) return out;
  const std::string data = read_file(path);
  std::size_t start = 0;
  std::size_t line_no = 1;
  while (start < data.size()) {
    const auto nl = data.find('\n', start);
    if (nl == std::string::npos) break;  // torn tail
    std::string_view line(data.data() + start, nl - start);
    if (!line.empty()) {
      try {
        out.push_back(ojson::parse(line));
      } catch (const ojson::parse_error& e) {
        throw StoreError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    start = nl + 1;
    ++line_no;
  }
  return out;
}

RunStore::RunStore(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw StoreError("cannot create store directory " + dir_.string() + ": " + ec.message());
}

bool RunStore::has_plan() const { return fs::exists(dir_ / "plan.json"); }

ojson RunStore::read_plan() const {
  try {
    return ojson::parse(read_file(dir_ / "plan.json"));
  } catch (const ojson::exception& e) {
    throw StoreError(std::string("unreadable plan.json: ") + e.what());
  } catch (const IoError& e) {
    throw StoreError(e.what());
  }
}

std::string RunStore::plan_fingerprint() const {
  auto plan = read_plan();
  if (!plan.contains("plan_fingerprint")) throw StoreError("plan.json has no fingerprint");
  return plan["plan_fingerprint"].get<std::string>();
}

void RunStore::write_plan(const ojson& manifest_snapshot, const ojson& plan) {
  std::lock_guard lock(mu_);
  try {
    write_file(dir_ / "manifest.json", manifest_snapshot.dump(2) + "\n");
    write_file(dir_ / "plan.json", plan.dump(2) + "\n");
  } catch (const IoError& e) {
    throw StoreError(e.what());
  }
}

void RunStore::append_line(const fs::path& path, std::ofstream& out, bool& repaired, const std::string& line) {
  if (!out.is_open()) {
    if (!repaired) {
      repair_tail(path);
      repaired = true;
    }
    out.open(path, std::ios::binary | std::ios::app);
    if (!out) throw StoreError("cannot open " + path.string() + " for append");
  }
  out << line << '\n';
  out.flush();
  if (!out) throw StoreError("append to " + path.string() + " failed");
}

void RunStore::append_record(const AttackRecord& r) {
  const std::string line = to_json(r).dump();
  std::lock_guard lock(mu_);
  append_line(records_path(), records_out_, records_repaired_, line);
}

void RunStore::append_verdict(const JobKey& key, const Verdict& v, const Timing& t) {
  const std::string line = verdict_to_json(key, v, t).dump();
  std::lock_guard lock(mu_);
  append_line(verdicts_path(), verdicts_out_, verdicts_repaired_, line);
}

std::map<JobKey, Verdict> RunStore::load_verdicts() const {
  std::map<JobKey, Verdict> out;
  for (const auto& j : read_jsonl(verdicts_path())) {
    try {
      out.emplace(key_from_json(j.at("key")), verdict_from_json(j));
    } catch (const ojson::exception& e) {
      throw StoreError(std::string("malformed verdict: ") + e.what());
    }
  }
  return out;
}

std::vector<AttackRecord> RunStore::load_records() const {
  std::vector<AttackRecord> out;
  std::set<JobKey> seen;
  for (const auto& j : read_jsonl(records_path())) {
    try {
      auto r = record_from_json(j);
      if (seen.insert(r.key).second) out.push_back(std::move(r));
    } catch (const ojson::exception& e) {
      throw StoreError(std::string("malformed record: ") + e.what());
    }
  }
  auto verdicts = load_verdicts();
  for (auto& r : out) {
    if (auto it = verdicts.find(r.key); it != verdicts.end()) r.verdict = it->second;
  }
  return out;
}

std::set<JobKey> RunStore::completion_index() const {
  std::set<JobKey> done;
  for (const auto& j : read_jsonl(records_path())) {
    try {
      done.insert(key_from_json(j.at("key")));
    } catch (const ojson::exception& e) {
      throw StoreError(std::string("malformed record: ") + e.what());
    }
  }
  return done;
}

}  // namespace schemaprobe
