#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace schemaprobe {

// Structured-output schemas embedded in composed prompts: classes of typed,
// described fields plus a query line that carries the task literal.

enum class ValueKind { Text, TextList, Integer, Nested, NestedList };

struct SchemaField {
  std::string name;
  std::string description;
  ValueKind kind = ValueKind::Text;
  std::string nested_class;  // set iff kind is Nested or NestedList

  bool operator==(const SchemaField&) const = default;
};

struct SchemaClass {
  std::string name;
  std::vector<SchemaField> fields;

  bool operator==(const SchemaClass&) const = default;
};

struct Provenance {
  bool derived = false;
  std::string parent_id;  // empty for core schemas

  static Provenance core() { return {}; }
  static Provenance derived_from(std::string parent) { return {true, std::move(parent)}; }
  bool operator==(const Provenance&) const = default;
};

struct TrojanSchema {
  std::string id;
  std::vector<SchemaClass> classes;
  std::string root_class;
  std::string query_template;
  Provenance provenance;

  const SchemaClass* find_class(std::string_view name) const;
  bool operator==(const TrojanSchema&) const = default;
};

// Equality ignoring id and provenance.
bool structurally_equal(const TrojanSchema& a, const TrojanSchema& b);

inline constexpr std::string_view kTaskToken = "{task}";
inline constexpr std::string_view kStepsToken = "{steps}";
inline constexpr int kDefaultSteps = 5;

struct Violation {
  std::string rule;     // e.g. "task-token-once", "no-cycle"
  std::string element;  // offending class/field/key
  std::vector<std::string> path;  // cycle path for "no-cycle"
};
using ValidationReport = std::vector<Violation>;

// Violations are data; an empty report means every invariant holds.
ValidationReport validate_schema(const TrojanSchema& schema);

// Schema-spec documents (JSON). Throws SyntaxError, ReferenceError, CycleError.
TrojanSchema parse_schema_spec(std::string_view text);
std::string render_schema_spec(const TrojanSchema& schema);
TrojanSchema load_schema_file(const std::string& path);

std::string_view to_string(ValueKind kind);

/// Edits applied by derive_schema, in this order: renames, added classes,
/// added fields. A rename key is either a class name ("Stage") or a
/// qualified field name ("Stage.summary"); class renames also rewrite
/// nested references, the root, and identifier occurrences in the query.
struct SchemaCustomization {
  std::vector<SchemaClass> added_classes;
  std::vector<std::pair<std::string, std::vector<SchemaField>>> added_fields;
  std::vector<std::pair<std::string, std::string>> renamed;
};

/// Returns a new schema with provenance derived(base.id). `new_id` defaults
/// to "<base.id>+custom". Throws ReferenceError, DuplicateError, CycleError,
/// InvalidSchema.
TrojanSchema derive_schema(const TrojanSchema& base, const SchemaCustomization& custom,
                           std::string new_id = {});

/// Renders the fenced class-definition block followed by the query line.
/// `{task}` becomes a double-quoted literal holding the escaped task and
/// `{steps}` its decimal value. Pure. Throws InvalidSchema.
std::string render_schema_snippet(const TrojanSchema& schema, int steps, std::string_view task);

// Backslash-escapes '\\', '"', and the control characters \n \r \t.
std::string escape_literal(std::string_view raw);

// The generic Task/Stage base schema.
const TrojanSchema& core_task_schema();

}  // namespace schemaprobe
