#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "schemaprobe/schema.hpp"
#include "schemaprobe/taxonomy.hpp"

namespace schemaprobe {

// Three-part attack template: framing, then the schema snippet, then the
// step-by-step reasoning request. `schema_mentions` are the spans of
// `cot_text` that refer to the schema; they are cut when the schema is
// ablated.
struct PromptTemplate {
  std::string id;
  std::optional<HarmCategory> category;
  std::string framing_text;
  std::string schema_ref;
  std::string cot_text;
  std::vector<std::string> schema_mentions;

  bool operator==(const PromptTemplate&) const = default;
};

// Empty when the template is usable; otherwise one message per problem.
std::vector<std::string> template_problems(const PromptTemplate& t);

// Template documents (JSON): id, category?, framing, schema, cot,
// cot_schema_mentions. Throws InvalidTemplate.
PromptTemplate parse_template(std::string_view text);
PromptTemplate load_template_file(const std::string& path);
std::string render_template(const PromptTemplate& t);

struct ComposedPrompt {
  std::string template_id;
  AblationVariant variant = AblationVariant::Full;
  std::string task_id;
  int steps = kDefaultSteps;
  std::string text;
  std::string fingerprint;  // sha256 of text
};

struct VariantFlags {
  bool framing = true;
  bool schema = true;
  bool cot = true;
};

VariantFlags flags_for(AblationVariant v);

// All four variants, Full first, as composition flags.
std::vector<std::pair<AblationVariant, VariantFlags>> make_variants(const PromptTemplate& t);

// The reasoning text with every schema mention removed and the leftover
// whitespace tidied.
std::string strip_schema_mentions(const PromptTemplate& t);

/// Joins the enabled components with one blank line. The NoSchema variant
/// also drops every schema mention from the reasoning text and rejects
/// templates whose remaining text still names a schema class. Throws
/// InvalidTemplate, InvalidSchema.
ComposedPrompt compose(const PromptTemplate& t, const TrojanSchema& schema, const AttackTask& task,
                       int steps, AblationVariant variant);

}  // namespace schemaprobe
