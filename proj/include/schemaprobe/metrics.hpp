#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaprobe/campaign.hpp"
#include "schemaprobe/guardrail.hpp"
#include "schemaprobe/store.hpp"

namespace schemaprobe {

struct AsrCounts {
  std::size_t successes = 0;
  std::size_t refusals = 0;
  std::size_t indeterminate = 0;  // non-success, kept in the denominator
  std::size_t excluded = 0;       // failed (or blocked, under the exclude policy)

  std::size_t denominator() const { return successes + refusals + indeterminate; }
  std::optional<double> asr() const;
  AsrCounts& operator+=(const AsrCounts& o);
};

struct AsrCell {
  std::string model_id;
  HarmCategory category = HarmCategory::HarassmentDiscrimination;
  AblationVariant variant = AblationVariant::Full;
  int tier = 1;
  AsrCounts counts;
};

/// ASR cells keyed by (model, category, variant). Every marginal is pooled
/// from the cells' counts; `mean_over_models` is the only unweighted figure.
struct AsrTable {
  std::vector<AsrCell> cells;  // sorted by model, category, variant
  std::map<std::string, int> tiers;
  std::set<std::string> judge_fingerprints;

  std::set<AblationVariant> variants() const;
  AsrCounts pooled(std::optional<AblationVariant> v = std::nullopt) const;
  std::map<std::string, AsrCounts> by_model(std::optional<AblationVariant> v = std::nullopt) const;
  std::map<HarmCategory, AsrCounts> by_category(std::optional<AblationVariant> v = std::nullopt) const;
  std::map<int, AsrCounts> by_tier(std::optional<AblationVariant> v = std::nullopt) const;
  // Unweighted mean of per-model ASRs; absent when no model has a denominator.
  std::optional<double> mean_over_models(std::optional<AblationVariant> v = std::nullopt) const;
};

// Merges cells with the same key. Throws Error("InconsistentTier") when a
// model appears with two tiers.
AsrTable build_table(const std::vector<AsrCell>& cells);

/// Groups judged records into cells. Throws UnjudgedRecords when an ok
/// record has no verdict.
AsrTable compute_asr(const std::vector<AttackRecord>& records, BlockedPolicy blocked = BlockedPolicy::CountAsRefusal);

struct TierRow {
  int tier = 1;
  std::size_t models = 0;
  AsrCounts counts;
};

std::vector<TierRow> tier_summary(const AsrTable& table, std::optional<AblationVariant> v = std::nullopt);

struct AblationRow {
  AblationVariant variant = AblationVariant::Full;
  AsrCounts counts;
  double asr = 0.0;
  double delta = 0.0;  // asr - Full asr
};

struct AblationReport {
  std::vector<AblationRow> pooled;                             // Full first
  std::map<std::string, std::vector<AblationRow>> per_model;  // models with a Full row
};

// Throws MissingBaseline without Full records.
AblationReport ablation_deltas(const AsrTable& table);

struct ReportBundle {
  std::optional<AsrTable> table;
  std::optional<AblationReport> ablation;
  std::optional<GuardMetrics> guard;
  bool plot = false;
};

std::string render_grid_csv(const AsrTable& table, AblationVariant v);
nlohmann::ordered_json summary_json(const ReportBundle& bundle);
nlohmann::ordered_json heatmap_plot_json(const AsrTable& table, AblationVariant v);

/// Writes asr_grid.csv (Full) and asr_grid_<variant>.csv for every other
/// variant, summary.json, and heatmap_plot.json when asked. Outputs depend
/// only on the bundle. Returns the written paths. Throws IoError.
std::vector<std::filesystem::path> emit_reports(const ReportBundle& bundle, const std::filesystem::path& out_dir);

}  // namespace schemaprobe
