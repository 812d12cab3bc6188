#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaprobe/dataset.hpp"
#include "schemaprobe/llm_client.hpp"

namespace schemaprobe {

enum class VerdictValue { Success, Refusal, Indeterminate };

std::string_view to_string(VerdictValue v);
std::optional<VerdictValue> parse_verdict_value(std::string_view s);

struct Verdict {
  VerdictValue value = VerdictValue::Indeterminate;
  std::string reason;  // parse-failure reason; set iff Indeterminate
  std::string reasoning_excerpt;
  std::string judge_fingerprint;
  int asks = 0;                       // judge requests spent on this record
  std::string source = "judge";       // "judge" or "auto"
};

struct Timing {
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;
  double latency_ms = 0.0;
};

struct AttackRecord {
  JobKey key;
  HarmCategory category = HarmCategory::HarassmentDiscrimination;
  int tier = 1;
  int steps = kDefaultSteps;
  std::string prompt_fingerprint;
  ModelResponse response;
  TransportOutcome outcome = TransportOutcome::Ok;
  std::string error;  // transport/protocol failure description
  Timing timing;
  std::optional<Verdict> verdict;  // joined from the verdict log on load
};

nlohmann::ordered_json to_json(const AttackRecord& r);  // without verdict
AttackRecord record_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json verdict_to_json(const JobKey& key, const Verdict& v, const Timing& t);

std::string utc_now_iso();

/// On-disk run directory:
///   manifest.json   manifest snapshot
///   plan.json       plan fingerprint and job list
///   records.jsonl   append-only attack records
///   verdicts.jsonl  append-only judge verdicts
/// Appends go through one mutex-guarded writer and are flushed per line. A
/// torn final line (crash mid-write) is ignored on replay and truncated
/// before the next append.
class RunStore {
 public:
  explicit RunStore(std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }

  bool has_plan() const;
  std::string plan_fingerprint() const;  // throws StoreError without a plan
  void write_plan(const nlohmann::ordered_json& manifest_snapshot, const nlohmann::ordered_json& plan);
  nlohmann::ordered_json read_plan() const;

  void append_record(const AttackRecord& r);
  void append_verdict(const JobKey& key, const Verdict& v, const Timing& t);

  // Records in log order with verdicts joined (first verdict per key wins).
  std::vector<AttackRecord> load_records() const;
  std::map<JobKey, Verdict> load_verdicts() const;
  std::set<JobKey> completion_index() const;

  std::filesystem::path records_path() const { return dir_ / "records.jsonl"; }
  std::filesystem::path verdicts_path() const { return dir_ / "verdicts.jsonl"; }

 private:
  void append_line(const std::filesystem::path& path, std::ofstream& out, bool& repaired, const std::string& line);

  std::filesystem::path dir_;
  std::mutex mu_;
  std::ofstream records_out_;
  std::ofstream verdicts_out_;
  bool records_repaired_ = false;
  bool verdicts_repaired_ = false;
};

// Parses every complete line of a JSONL file; a trailing partial line is
// skipped. Throws StoreError on a corrupt complete line.
std::vector<nlohmann::ordered_json> read_jsonl(const std::filesystem::path& path);

}  // namespace schemaprobe
