#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaprobe/dataset.hpp"
#include "schemaprobe/forge.hpp"
#include "schemaprobe/llm_client.hpp"
#include "schemaprobe/schema.hpp"
#include "schemaprobe/store.hpp"

namespace schemaprobe {

enum class BlockedPolicy { CountAsRefusal, Exclude };

struct TaskSetRef {
  std::filesystem::path path;
  TaskLabel label = TaskLabel::Positive;
};

struct ModelRole {
  ModelTarget target;
  std::filesystem::path policy_path;
};

/// Campaign description as read from a manifest file. Relative paths are
/// resolved against the base directory (the --workdir, or the manifest's
/// own directory).
struct CampaignManifest {
  std::string name;
  bool authorized_testing = false;
  std::vector<ModelTarget> models;
  std::vector<TaskSetRef> task_sets;
  std::map<std::string, HarmCategory> category_aliases;
  std::vector<std::filesystem::path> schema_paths;
  std::vector<std::filesystem::path> template_paths;
  std::vector<AblationVariant> variants{AblationVariant::Full};
  Pairing pairing = Pairing::ByCategory;
  int steps = kDefaultSteps;
  int concurrency = 1;
  int per_endpoint_cap = 0;  // 0 = same as concurrency
  std::filesystem::path output_dir = "runs";
  BlockedPolicy blocked_policy = BlockedPolicy::CountAsRefusal;
  std::optional<ModelRole> judge;
  std::optional<ModelRole> guard;
  std::optional<std::filesystem::path> guard_flag_terms;
  std::size_t guard_max_prompt_chars = 24000;

  nlohmann::ordered_json raw;  // the parsed document, snapshotted into stores
};

// Throws ManifestError(field, reason).
CampaignManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);
CampaignManifest load_manifest(const std::filesystem::path& path,
                               std::optional<std::filesystem::path> workdir = std::nullopt);

// Name of the environment variable an endpoint still waits for, if any.
std::optional<std::string> unresolved_endpoint(const ModelTarget& t);

// Every problem with the manifest's own fields (not the files it names).
std::vector<std::string> manifest_problems(const CampaignManifest& m);

struct PlannedPrompt {
  std::string text;
  std::string fingerprint;
};

/// Resolved, composed campaign: every job with its prompt. The fingerprint
/// covers job keys, prompt fingerprints and generation parameters, but not
/// endpoint URLs, so a moved server does not invalidate a run.
struct Plan {
  std::vector<PromptJob> jobs;
  std::map<JobKey, PlannedPrompt> prompts;
  std::map<std::string, ModelTarget> targets;
  TaskSet tasks;  // merged task sets
  std::vector<PromptTemplate> templates;
  std::map<std::string, TrojanSchema> schemas;
  std::string fingerprint;

  nlohmann::ordered_json to_json() const;
};

// Loads and composes everything the manifest names. Throws ManifestError.
Plan plan(const CampaignManifest& manifest);

struct RunOptions {
  int concurrency = 1;
  int per_endpoint_cap = 0;
  const std::atomic<bool>* cancel = nullptr;  // stop taking new jobs once set
  std::function<void(const AttackRecord&)> on_record;
};

struct RunSummary {
  std::size_t planned = 0;
  std::size_t executed = 0;  // jobs sent during this call
  std::size_t records = 0;   // records in the store afterwards
  std::size_t ok = 0;
  std::size_t provider_blocked = 0;
  std::size_t failed = 0;

  bool complete() const { return records == planned; }
};

/// Records the plan (or checks it against the stored one, throwing
/// PlanMismatch) and executes every job missing from the completion index.
/// Each job yields exactly one record, flushed as it is produced; transport
/// failures become `failed` records.
RunSummary run(const Plan& plan, const CampaignManifest& manifest, RunStore& store, const ChatClient& client,
               const RunOptions& options);

// Like run(), but requires an existing plan in the store.
RunSummary resume(const Plan& plan, const CampaignManifest& manifest, RunStore& store, const ChatClient& client,
                  const RunOptions& options);

// Counts over the records currently in the store.
RunSummary summarize(const Plan& plan, const RunStore& store);

}  // namespace schemaprobe
