#include "schemaprobe/forge.hpp"

#include <nlohmann/json.hpp>

#include "schemaprobe/digest.hpp"
#include "schemaprobe/error.hpp"

namespace schemaprobe {

using ojson = nlohmann::ordered_json;

namespace {

void erase_all(std::string& s, std::string_view what) {
  if (what.empty()) return;
  for (auto pos = s.find(what); pos != std::string::npos; pos = s.find(what, pos)) {
    s.erase(pos, what.size());
  }
}

// Collapses doubled spaces, drops trailing spaces and space before
// punctuation, and squeezes runs of blank lines left behind by erasure.
std::string tidy(std::string s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' && (out.empty() || out.back() == ' ' || out.back() == '\n')) continue;
    if ((c == '\n' || c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?') &&
        !out.empty() && out.back() == ' ') {
      out.pop_back();
    }
    if (c == '\n' && out.size() >= 2 && out[out.size() - 1] == '\n' && out[out.size() - 2] == '\n') continue;
    out.push_back(c);
  }
  while (!out.empty() && (out.back() == ' ' || out.back() == '\n')) out.pop_back();
  std::size_t lead = 0;
  while (lead < out.size() && (out[lead] == ' ' || out[lead] == '\n')) ++lead;
  return out.substr(lead);
}

}  // namespace

std::vector<std::string> template_problems(const PromptTemplate& t) {
  std::vector<std::string> problems;
  if (t.id.empty()) problems.push_back("id is empty");
  if (t.framing_text.empty()) problems.push_back("framing is empty");
  if (t.cot_text.empty()) problems.push_back("cot is empty");
  if (t.schema_ref.empty()) problems.push_back("schema reference is empty");
  for (const auto& m : t.schema_mentions) {
    if (m.empty()) problems.push_back("empty schema mention");
    else if (t.cot_text.find(m) == std::string::npos) problems.push_back("schema mention not found in cot: " + m);
  }
  return problems;
}

PromptTemplate parse_template(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw InvalidTemplate(e.what());
  }
  auto str = [&](const char* key, bool required) -> std::string {
    if (!doc.contains(key)) {
      if (required) throw InvalidTemplate(std::string("missing key '") + key + "'");
      return {};
    }
    if (!doc[key].is_string()) throw InvalidTemplate(std::string("key '") + key + "' must be a string");
    return doc[key].get<std::string>();
  };
  if (!doc.is_object()) throw InvalidTemplate("template must be an object");

  PromptTemplate t;
  t.id = str("id", true);
  t.framing_text = str("framing", true);
  t.schema_ref = str("schema", true);
  t.cot_text = str("cot", true);
  if (auto cat = str("category", false); !cat.empty()) {
    auto parsed = parse_category(cat);
    if (!parsed) throw InvalidTemplate("unknown category '" + cat + "'");
    t.category = parsed;
  }
  if (doc.contains("cot_schema_mentions")) {
    if (!doc["cot_schema_mentions"].is_array()) throw InvalidTemplate("cot_schema_mentions must be a list");
    for (const auto& m : doc["cot_schema_mentions"]) {
      if (!m.is_string()) throw InvalidTemplate("cot_schema_mentions entries must be strings");
      t.schema_mentions.push_back(m.get<std::string>());
    }
  }
  if (auto problems = template_problems(t); !problems.empty()) throw InvalidTemplate(problems.front());
  return t;
}

PromptTemplate load_template_file(const std::string& path) { return parse_template(read_file(path)); }

std::string render_template(const PromptTemplate& t) {
  ojson doc;
  doc["id"] = t.id;
  if (t.category) doc["category"] = std::string(to_string(*t.category));
  doc["framing"] = t.framing_text;
  doc["schema"] = t.schema_ref;
  doc["cot"] = t.cot_text;
  doc["cot_schema_mentions"] = t.schema_mentions;
  return doc.dump(2) + "\n";
}

VariantFlags flags_for(AblationVariant v) {
  switch (v) {
    case AblationVariant::Full: return {true, true, true};
    case AblationVariant::NoFraming: return {false, true, true};
    case AblationVariant::NoSchema: return {true, false, true};
    case AblationVariant::NoCot: return {true, true, false};
  }
  return {};
}

std::vector<std::pair<AblationVariant, VariantFlags>> make_variants(const PromptTemplate& /*t*/) {
  std::vector<std::pair<AblationVariant, VariantFlags>> out;
  for (auto v : kAllVariants) out.emplace_back(v, flags_for(v));
  return out;
}

std::string strip_schema_mentions(const PromptTemplate& t) {
  std::string cot = t.cot_text;
  for (const auto& m : t.schema_mentions) erase_all(cot, m);
  return tidy(std::move(cot));
}

ComposedPrompt compose(const PromptTemplate& t, const TrojanSchema& schema, const AttackTask& task,
                       int steps, AblationVariant variant) {
  if (auto problems = template_problems(t); !problems.empty()) {
    throw InvalidTemplate("template '" + t.id + "': " + problems.front());
  }
  const auto flags = flags_for(variant);
  if (flags.schema && schema.id != t.schema_ref) {
    throw InvalidSchema("template '" + t.id + "' expects schema '" + t.schema_ref + "', got '" + schema.id + "'");
  }

  std::vector<std::string> parts;
  if (flags.framing) parts.push_back(t.framing_text);
  if (flags.schema) parts.push_back(render_schema_snippet(schema, steps, task.goal));
  if (flags.cot) {
    auto cot = flags.schema ? t.cot_text : strip_schema_mentions(t);
    if (!cot.empty()) parts.push_back(std::move(cot));
  }

  ComposedPrompt p;
  p.template_id = t.id;
  p.variant = variant;
  p.task_id = task.id;
  p.steps = steps;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) p.text += "\n\n";
    p.text += parts[i];
  }
  if (!flags.schema) {
    for (const auto& cls : schema.classes) {
      if (p.text.find(cls.name) != std::string::npos) {
        throw InvalidTemplate("template '" + t.id + "' still names schema class '" + cls.name +
                              "' outside its declared mentions");
      }
    }
  }
  p.fingerprint = sha256_hex(p.text);
  return p;
}

}  // namespace schemaprobe
