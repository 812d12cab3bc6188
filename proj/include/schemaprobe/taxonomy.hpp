#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace schemaprobe {

enum class HarmCategory {
  HarassmentDiscrimination,
  EconomicHarm,
  PhysicalHarm,
  SexualAdultContent,
  MalwareHacking,
  GovernmentDecisionMaking,
  FraudDeception,
  Privacy,
  Disinformation,
  ExpertAdvice,
};

inline constexpr std::array<HarmCategory, 10> kAllCategories{
    HarmCategory::HarassmentDiscrimination, HarmCategory::EconomicHarm,
    HarmCategory::PhysicalHarm,             HarmCategory::SexualAdultContent,
    HarmCategory::MalwareHacking,           HarmCategory::GovernmentDecisionMaking,
    HarmCategory::FraudDeception,           HarmCategory::Privacy,
    HarmCategory::Disinformation,           HarmCategory::ExpertAdvice,
};

// Canonical display name, e.g. "Malware/Hacking".
std::string_view to_string(HarmCategory c);

// Case-insensitive lookup against the canonical names, then `aliases`
// (keys compared case-insensitively as well).
std::optional<HarmCategory> parse_category(std::string_view name,
                                           const std::map<std::string, HarmCategory>& aliases = {});

enum class AblationVariant { Full, NoFraming, NoSchema, NoCot };

inline constexpr std::array<AblationVariant, 4> kAllVariants{
    AblationVariant::Full, AblationVariant::NoFraming, AblationVariant::NoSchema,
    AblationVariant::NoCot};

std::string_view to_string(AblationVariant v);
std::optional<AblationVariant> parse_variant(std::string_view name);

enum class TaskLabel { Positive, BorderlineBenign };

std::string_view to_string(TaskLabel l);

struct AttackTask {
  std::string id;
  HarmCategory category = HarmCategory::HarassmentDiscrimination;
  std::string goal;
  TaskLabel label = TaskLabel::Positive;

  bool operator==(const AttackTask&) const = default;
};

}  // namespace schemaprobe
