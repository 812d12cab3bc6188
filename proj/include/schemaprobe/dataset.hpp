#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "schemaprobe/forge.hpp"
#include "schemaprobe/llm_client.hpp"
#include "schemaprobe/taxonomy.hpp"

namespace schemaprobe {

struct TaskSet {
  std::string name;
  std::vector<AttackTask> tasks;
  std::string source_digest;  // sha256 of the file bytes

  const AttackTask* find(std::string_view id) const;
};

/// Reads a delimited task file whose header names the columns id, category
/// and goal (any order, extra columns ignored; comma or tab separated,
/// RFC 4180 quoting). Every task gets `expected_label`. Throws IoError,
/// ParseError, UnknownCategory, DuplicateId.
TaskSet load_task_set(const std::filesystem::path& path, TaskLabel expected_label,
                      const std::map<std::string, HarmCategory>& aliases = {});
TaskSet parse_task_set(std::string_view text, std::string name, TaskLabel expected_label,
                       const std::map<std::string, HarmCategory>& aliases = {});

// Splits delimited text into rows of fields.
std::vector<std::vector<std::string>> parse_delimited(std::string_view text, char delimiter);

struct JobKey {
  std::string model_id;
  std::string template_id;
  AblationVariant variant = AblationVariant::Full;
  std::string task_id;

  auto operator<=>(const JobKey&) const = default;
  bool operator==(const JobKey&) const = default;
};

// "model|template|variant|task"; the form used in label files.
std::string to_string(const JobKey& k);
JobKey parse_job_key(std::string_view s);

struct PromptJob {
  std::string model_id;
  std::string template_id;
  AblationVariant variant = AblationVariant::Full;
  std::string task_id;
  int steps = kDefaultSteps;

  JobKey key() const { return {model_id, template_id, variant, task_id}; }
  bool operator==(const PromptJob&) const = default;
};

enum class Pairing { ByCategory, AllPairs };

std::string_view to_string(Pairing p);
std::optional<Pairing> parse_pairing(std::string_view s);

/// Enumerates jobs in (model, template, task, variant) order. ByCategory
/// pairs each task only with templates of its category and throws
/// MissingTemplateForCategory when a task's category has none (or when a
/// template declares no category).
std::vector<PromptJob> cross_product(const TaskSet& tasks, std::span<const PromptTemplate> templates,
                                     std::span<const ModelTarget> models,
                                     std::span<const AblationVariant> variants, Pairing pairing,
                                     int steps = kDefaultSteps);

}  // namespace schemaprobe
