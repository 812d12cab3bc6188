#include "schemaprobe/taxonomy.hpp"

#include <algorithm>
#include <cctype>

namespace schemaprobe {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view to_string(HarmCategory c) {
  switch (c) {
    case HarmCategory::HarassmentDiscrimination: return "Harassment/Discrimination";
    case HarmCategory::EconomicHarm: return "Economic Harm";
    case HarmCategory::PhysicalHarm: return "Physical Harm";
    case HarmCategory::SexualAdultContent: return "Sexual/Adult Content";
    case HarmCategory::MalwareHacking: return "Malware/Hacking";
    case HarmCategory::GovernmentDecisionMaking: return "Government Decision-Making";
    case HarmCategory::FraudDeception: return "Fraud/Deception";
    case HarmCategory::Privacy: return "Privacy";
    case HarmCategory::Disinformation: return "Disinformation";
    case HarmCategory::ExpertAdvice: return "Expert Advice";
  }
  return "";
}

std::optional<HarmCategory> parse_category(std::string_view name,
                                           const std::map<std::string, HarmCategory>& aliases) {
  name = strip(name);
  for (auto c : kAllCategories) {
    if (iequals(name, to_string(c))) return c;
  }
  for (const auto& [alias, c] : aliases) {
    if (iequals(name, alias)) return c;
  }
  return std::nullopt;
}

std::string_view to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::Full: return "Full";
    case AblationVariant::NoFraming: return "NoFraming";
    case AblationVariant::NoSchema: return "NoSchema";
    case AblationVariant::NoCot: return "NoCot";
  }
  return "Full";
}

std::optional<AblationVariant> parse_variant(std::string_view name) {
  for (auto v : kAllVariants) {
    if (iequals(strip(name), to_string(v))) return v;
  }
  return std::nullopt;
}

std::string_view to_string(TaskLabel l) {
  return l == TaskLabel::Positive ? "positive" : "borderline-benign";
}

}  // namespace schemaprobe
