#include "schemaprobe/schema.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "schemaprobe/digest.hpp"
#include "schemaprobe/error.hpp"

namespace schemaprobe {

using ojson = nlohmann::ordered_json;

namespace {

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string replace_identifier(std::string_view text, std::string_view from, std::string_view to) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    auto pos = text.find(from, i);
    if (pos == std::string_view::npos) break;
    bool left_ok = pos == 0 || !is_ident_char(text[pos - 1]);
    bool right_ok = pos + from.size() >= text.size() || !is_ident_char(text[pos + from.size()]);
    out.append(text.substr(i, pos - i));
    out.append(left_ok && right_ok ? to : from);
    i = pos + from.size();
  }
  out.append(text.substr(std::min(i, text.size())));
  return out;
}

bool is_nested(ValueKind k) { return k == ValueKind::Nested || k == ValueKind::NestedList; }

// Depth-first search over nested references; returns the first cycle found
// as [A, B, ..., A].
std::optional<std::vector<std::string>> find_cycle(const TrojanSchema& s) {
  std::map<std::string, int> state;  // 0 unvisited, 1 on stack, 2 done
  std::vector<std::string> stack;
  std::optional<std::vector<std::string>> found;

  auto visit = [&](auto&& self, const std::string& name) -> void {
    if (found) return;
    state[name] = 1;
    stack.push_back(name);
    if (const auto* cls = s.find_class(name)) {
      for (const auto& f : cls->fields) {
        if (!is_nested(f.kind) || !s.find_class(f.nested_class)) continue;
        int st = state[f.nested_class];
        if (st == 1) {
          auto it = std::find(stack.begin(), stack.end(), f.nested_class);
          std::vector<std::string> path(it, stack.end());
          path.push_back(f.nested_class);
          found = std::move(path);
          return;
        }
        if (st == 0) self(self, f.nested_class);
        if (found) return;
      }
    }
    stack.pop_back();
    state[name] = 2;
  };

  for (const auto& cls : s.classes) {
    if (state[cls.name] == 0) visit(visit, cls.name);
    if (found) break;
  }
  return found;
}

std::string annotation(const SchemaField& f) {
  switch (f.kind) {
    case ValueKind::Text: return "str";
    case ValueKind::TextList: return "list[str]";
    case ValueKind::Integer: return "int";
    case ValueKind::Nested: return f.nested_class;
    case ValueKind::NestedList: return "list[" + f.nested_class + "]";
  }
  return "str";
}

// Throws the error type matching the first violation.
void raise_first(const ValidationReport& report) {
  if (report.empty()) return;
  for (const auto& v : report) {
    if (v.rule == "nested-ref-resolves" || v.rule == "root-exists") throw ReferenceError(v.element);
  }
  for (const auto& v : report) {
    if (v.rule == "no-cycle") throw CycleError(v.path);
  }
  for (const auto& v : report) {
    if (v.rule == "class-name-unique" || v.rule == "field-name-unique") throw DuplicateError(v.element);
  }
  throw InvalidSchema(report.front().rule + ": " + report.front().element);
}

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

std::size_t line_of_key(std::string_view text, std::string_view key) {
  auto pos = text.find("\"" + std::string(key) + "\"");
  return pos == std::string_view::npos ? 0 : line_of(text, pos);
}

ValueKind parse_kind(const std::string& raw, std::string& nested, std::size_t line) {
  if (raw == "text") return ValueKind::Text;
  if (raw == "text-list") return ValueKind::TextList;
  if (raw == "int") return ValueKind::Integer;
  if (raw.rfind("ref:", 0) == 0 && raw.size() > 4) {
    nested = raw.substr(4);
    return ValueKind::Nested;
  }
  if (raw.rfind("ref-list:", 0) == 0 && raw.size() > 9) {
    nested = raw.substr(9);
    return ValueKind::NestedList;
  }
  throw SyntaxError(line, "unknown field kind '" + raw + "'");
}

std::string kind_spec(const SchemaField& f) {
  switch (f.kind) {
    case ValueKind::Nested: return "ref:" + f.nested_class;
    case ValueKind::NestedList: return "ref-list:" + f.nested_class;
    default: return std::string(to_string(f.kind));
  }
}

}  // namespace

const SchemaClass* TrojanSchema::find_class(std::string_view name) const {
  for (const auto& c : classes) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

bool structurally_equal(const TrojanSchema& a, const TrojanSchema& b) {
  return a.classes == b.classes && a.root_class == b.root_class &&
         a.query_template == b.query_template;
}

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::Text: return "text";
    case ValueKind::TextList: return "text-list";
    case ValueKind::Integer: return "int";
    case ValueKind::Nested: return "ref";
    case ValueKind::NestedList: return "ref-list";
  }
  return "text";
}

ValidationReport validate_schema(const TrojanSchema& s) {
  ValidationReport out;
  auto add = [&](std::string rule, std::string element, std::vector<std::string> path = {}) {
    out.push_back({std::move(rule), std::move(element), std::move(path)});
  };

  if (s.id.empty()) add("id-nonempty", "id");
  std::set<std::string> class_names;
  for (const auto& cls : s.classes) {
    if (cls.name.empty() || has_whitespace(cls.name)) add("class-name-valid", cls.name);
    if (!class_names.insert(cls.name).second) add("class-name-unique", cls.name);
    if (cls.fields.empty()) add("class-has-fields", cls.name);
    std::set<std::string> field_names;
    for (const auto& f : cls.fields) {
      const std::string where = cls.name + "." + f.name;
      if (f.name.empty() || has_whitespace(f.name)) add("field-name-valid", where);
      if (!field_names.insert(f.name).second) add("field-name-unique", where);
      if (f.description.find_first_of("\r\n") != std::string::npos) {
        add("description-single-line", where);
      }
      if (is_nested(f.kind) && !s.find_class(f.nested_class)) {
        add("nested-ref-resolves", f.nested_class);
      }
    }
  }
  if (!s.find_class(s.root_class)) add("root-exists", s.root_class);
  if (count_occurrences(s.query_template, kTaskToken) != 1) add("task-token-once", "query");
  if (count_occurrences(s.query_template, kStepsToken) > 1) add("steps-token-at-most-once", "query");
  if (s.query_template.find_first_of("\r\n") != std::string::npos) add("query-single-line", "query");
  if (auto cycle = find_cycle(s)) add("no-cycle", cycle->front(), *cycle);
  return out;
}

TrojanSchema parse_schema_spec(std::string_view text) {
  // Track keys per open object so duplicates are rejected rather than
  // silently overwritten.
  std::vector<std::set<std::string>> seen;
  std::optional<std::string> duplicate;
  auto cb = [&](int /*depth*/, ojson::parse_event_t ev, ojson& parsed) {
    switch (ev) {
      case ojson::parse_event_t::object_start: seen.emplace_back(); break;
      case ojson::parse_event_t::object_end: if (!seen.empty()) seen.pop_back(); break;
      case ojson::parse_event_t::key:
        if (!seen.empty() && !seen.back().insert(parsed.get<std::string>()).second && !duplicate) {
          duplicate = parsed.get<std::string>();
        }
        break;
      default: break;
    }
    return true;
  };

  ojson doc;
  try {
    doc = ojson::parse(text.begin(), text.end(), cb);
  } catch (const ojson::parse_error& e) {
    throw SyntaxError(line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  if (duplicate) throw SyntaxError(line_of_key(text, *duplicate), "duplicate key '" + *duplicate + "'");
  if (!doc.is_object()) throw SyntaxError(1, "document must be an object");

  auto require_string = [&](const char* key) -> std::string {
    if (!doc.contains(key) || !doc[key].is_string()) {
      throw SyntaxError(line_of_key(text, key), std::string("missing string key '") + key + "'");
    }
    return doc[key].get<std::string>();
  };

  TrojanSchema s;
  s.id = require_string("id");
  s.root_class = require_string("root");
  s.query_template = require_string("query");
  if (doc.contains("provenance")) {
    if (!doc["provenance"].is_string()) throw SyntaxError(line_of_key(text, "provenance"), "provenance must be a string");
    auto p = doc["provenance"].get<std::string>();
    if (p == "core") {
      s.provenance = Provenance::core();
    } else if (p.rfind("derived:", 0) == 0 && p.size() > 8) {
      s.provenance = Provenance::derived_from(p.substr(8));
    } else {
      throw SyntaxError(line_of_key(text, "provenance"), "provenance must be 'core' or 'derived:<id>'");
    }
  }
  if (!doc.contains("classes") || !doc["classes"].is_object()) {
    throw SyntaxError(line_of_key(text, "classes"), "missing object key 'classes'");
  }
  for (const auto& [cname, entries] : doc["classes"].items()) {
    const auto line = line_of_key(text, cname);
    if (!entries.is_array()) throw SyntaxError(line, "class '" + cname + "' must map to a list of fields");
    SchemaClass cls{cname, {}};
    for (const auto& e : entries) {
      if (!e.is_object() || !e.contains("name") || !e["name"].is_string() || !e.contains("kind") ||
          !e["kind"].is_string()) {
        throw SyntaxError(line, "field entries of '" + cname + "' need string 'name' and 'kind'");
      }
      SchemaField f;
      f.name = e["name"].get<std::string>();
      if (e.contains("description")) {
        if (!e["description"].is_string()) throw SyntaxError(line, "description must be a string");
        f.description = e["description"].get<std::string>();
      }
      f.kind = parse_kind(e["kind"].get<std::string>(), f.nested_class, line_of_key(text, f.name));
      cls.fields.push_back(std::move(f));
    }
    s.classes.push_back(std::move(cls));
  }

  auto report = validate_schema(s);
  for (const auto& v : report) {
    if (v.rule == "nested-ref-resolves" || v.rule == "root-exists") throw ReferenceError(v.element);
  }
  for (const auto& v : report) {
    if (v.rule == "no-cycle") throw CycleError(v.path);
  }
  if (!report.empty()) {
    const auto& v = report.front();
    throw SyntaxError(line_of_key(text, v.element == "query" ? "query" : v.element), v.rule + ": " + v.element);
  }
  return s;
}

std::string render_schema_spec(const TrojanSchema& s) {
  ojson doc;
  doc["id"] = s.id;
  doc["provenance"] = s.provenance.derived ? "derived:" + s.provenance.parent_id : std::string("core");
  doc["root"] = s.root_class;
  doc["query"] = s.query_template;
  ojson classes = ojson::object();
  for (const auto& cls : s.classes) {
    ojson fields = ojson::array();
    for (const auto& f : cls.fields) {
      fields.push_back({{"name", f.name}, {"kind", kind_spec(f)}, {"description", f.description}});
    }
    classes[cls.name] = std::move(fields);
  }
  doc["classes"] = std::move(classes);
  return doc.dump(2) + "\n";
}

TrojanSchema load_schema_file(const std::string& path) {
  return parse_schema_spec(read_file(path));
}

TrojanSchema derive_schema(const TrojanSchema& base, const SchemaCustomization& custom,
                           std::string new_id) {
  if (auto report = validate_schema(base); !report.empty()) {
    throw InvalidSchema("base schema '" + base.id + "' is invalid: " + report.front().rule);
  }
  TrojanSchema out = base;
  out.id = new_id.empty() ? base.id + "+custom" : std::move(new_id);
  out.provenance = Provenance::derived_from(base.id);

  auto find_mut = [&](std::string_view name) -> SchemaClass* {
    for (auto& c : out.classes) {
      if (c.name == name) return &c;
    }
    return nullptr;
  };

  for (const auto& [from, to] : custom.renamed) {
    if (to.empty() || has_whitespace(to)) throw InvalidSchema("invalid rename target '" + to + "'");
    if (auto dot = from.find('.'); dot != std::string::npos) {
      auto* cls = find_mut(from.substr(0, dot));
      if (!cls) throw ReferenceError(from.substr(0, dot));
      auto field_name = from.substr(dot + 1);
      auto it = std::find_if(cls->fields.begin(), cls->fields.end(),
                             [&](const SchemaField& f) { return f.name == field_name; });
      if (it == cls->fields.end()) throw ReferenceError(from);
      if (std::any_of(cls->fields.begin(), cls->fields.end(), [&](const SchemaField& f) { return f.name == to; })) {
        throw DuplicateError(cls->name + "." + to);
      }
      it->name = to;
      continue;
    }
    auto* cls = find_mut(from);
    if (!cls) throw ReferenceError(from);
    if (find_mut(to)) throw DuplicateError(to);
    cls->name = to;
    for (auto& c : out.classes) {
      for (auto& f : c.fields) {
        if (is_nested(f.kind) && f.nested_class == from) f.nested_class = to;
      }
    }
    if (out.root_class == from) out.root_class = to;
    out.query_template = replace_identifier(out.query_template, from, to);
  }

  for (const auto& cls : custom.added_classes) {
    if (find_mut(cls.name)) throw DuplicateError(cls.name);
    out.classes.push_back(cls);
  }

  for (const auto& [cname, fields] : custom.added_fields) {
    auto* cls = find_mut(cname);
    if (!cls) throw ReferenceError(cname);
    for (const auto& f : fields) {
      if (std::any_of(cls->fields.begin(), cls->fields.end(), [&](const SchemaField& g) { return g.name == f.name; })) {
        throw DuplicateError(cname + "." + f.name);
      }
      cls->fields.push_back(f);
    }
  }

  raise_first(validate_schema(out));
  return out;
}

std::string escape_literal(std::string_view raw) {
  std::string out;
  out.reserve(raw.size() + 8);
  for (char c : raw) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string render_schema_snippet(const TrojanSchema& s, int steps, std::string_view task) {
  if (auto report = validate_schema(s); !report.empty()) {
    throw InvalidSchema("schema '" + s.id + "' is invalid: " + report.front().rule + " (" +
                        report.front().element + ")");
  }
  if (steps < 1) throw InvalidSchema("steps must be >= 1");
  if (task.empty()) throw InvalidSchema("task must be non-empty");

  std::string out = "```\n";
  for (const auto& cls : s.classes) {
    out += "class " + cls.name + ":\n";
    for (const auto& f : cls.fields) {
      out += "    " + f.name + ": " + annotation(f);
      if (!f.description.empty()) out += "  # " + f.description;
      out += "\n";
    }
    out += "\n";
  }

  // Single pass so that a task containing "{steps}" is left alone.
  const std::string& q = s.query_template;
  std::size_t i = 0;
  while (i < q.size()) {
    if (q.compare(i, kTaskToken.size(), kTaskToken) == 0) {
      out += "\"" + escape_literal(task) + "\"";
      i += kTaskToken.size();
    } else if (q.compare(i, kStepsToken.size(), kStepsToken) == 0) {
      out += std::to_string(steps);
      i += kStepsToken.size();
    } else {
      out.push_back(q[i++]);
    }
  }
  out += "\n```";
  return out;
}

const TrojanSchema& core_task_schema() {
  static const TrojanSchema cts = [] {
    TrojanSchema s;
    s.id = "core-task-schema";
    s.root_class = "Task";
    s.query_template = "plan = Task.build(objective={task}, stage_count={steps})";
    s.provenance = Provenance::core();
    s.classes = {
        {"Task",
         {{"title", "short name for the overall objective", ValueKind::Text, {}},
          {"objective", "what the finished plan accomplishes", ValueKind::Text, {}},
          {"stages", "ordered stages, one entry per requested step", ValueKind::NestedList, "Stage"}}},
        {"Stage",
         {{"summary", "one-line summary of the stage", ValueKind::Text, {}},
          {"details", "concrete actions carried out in the stage", ValueKind::TextList, {}}}},
    };
    return s;
  }();
  return cts;
}

}  // namespace schemaprobe
