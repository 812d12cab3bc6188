#include "schemaprobe/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "schemaprobe/digest.hpp"
#include "schemaprobe/error.hpp"

namespace schemaprobe {

namespace {

std::string lower_trim(std::string s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

const AttackTask* TaskSet::find(std::string_view id) const {
  auto it = std::find_if(tasks.begin(), tasks.end(), [&](const AttackTask& t) { return t.id == id; });
  return it == tasks.end() ? nullptr : &*it;
}

std::vector<std::vector<std::string>> parse_delimited(std::string_view text, char delimiter) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t row_no = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    bool blank = row.size() == 1 && row.front().find_first_not_of(" \t\r") == std::string::npos;
    if (!blank) rows.push_back(std::move(row));
    row.clear();
    ++row_no;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++row_no;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw ParseError(row_no, "unterminated quoted field");
  if (!field.empty() || !row.empty()) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    end_row();
  }
  return rows;
}

TaskSet parse_task_set(std::string_view text, std::string name, TaskLabel expected_label,
                       const std::map<std::string, HarmCategory>& aliases) {
  auto first_line = text.substr(0, text.find('\n'));
  char delim = (first_line.find('\t') != std::string_view::npos && first_line.find(',') == std::string_view::npos)
                   ? '\t'
                   : ',';
  auto rows = parse_delimited(text, delim);
  if (rows.empty()) throw ParseError(1, "missing header row");

  int col_id = -1, col_cat = -1, col_goal = -1;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    auto h = lower_trim(rows[0][i]);
    if (h == "id") col_id = static_cast<int>(i);
    else if (h == "category") col_cat = static_cast<int>(i);
    else if (h == "goal") col_goal = static_cast<int>(i);
  }
  if (col_id < 0 || col_cat < 0 || col_goal < 0) throw ParseError(1, "header must name id, category and goal");
  const auto width = static_cast<std::size_t>(std::max({col_id, col_cat, col_goal})) + 1;

  TaskSet set;
  set.name = std::move(name);
  set.source_digest = sha256_hex(text);
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() < width) throw ParseError(r + 1, "expected at least " + std::to_string(width) + " fields");
    AttackTask t;
    t.id = row[static_cast<std::size_t>(col_id)];
    t.goal = row[static_cast<std::size_t>(col_goal)];
    if (t.id.empty()) throw ParseError(r + 1, "empty id");
    if (t.goal.empty()) throw ParseError(r + 1, "empty goal");
    auto cat = parse_category(row[static_cast<std::size_t>(col_cat)], aliases);
    if (!cat) throw UnknownCategory(row[static_cast<std::size_t>(col_cat)]);
    t.category = *cat;
    t.label = expected_label;
    if (!seen.insert(t.id).second) throw DuplicateId(t.id);
    set.tasks.push_back(std::move(t));
  }
  return set;
}

TaskSet load_task_set(const std::filesystem::path& path, TaskLabel expected_label,
                      const std::map<std::string, HarmCategory>& aliases) {
  return parse_task_set(read_file(path), path.stem().string(), expected_label, aliases);
}

std::string to_string(const JobKey& k) {
  return k.model_id + "|" + k.template_id + "|" + std::string(to_string(k.variant)) + "|" + k.task_id;
}

JobKey parse_job_key(std::string_view s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    auto bar = s.find('|', start);
    parts.emplace_back(s.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  if (parts.size() != 4) throw Error("InvalidKey", "record key needs 4 '|'-separated parts: " + std::string(s));
  auto v = parse_variant(parts[2]);
  if (!v) throw Error("InvalidKey", "unknown variant in key: " + std::string(s));
  return {parts[0], parts[1], *v, parts[3]};
}

std::string_view to_string(Pairing p) { return p == Pairing::ByCategory ? "by-category" : "all-pairs"; }

std::optional<Pairing> parse_pairing(std::string_view s) {
  if (s == "by-category") return Pairing::ByCategory;
  if (s == "all-pairs") return Pairing::AllPairs;
  return std::nullopt;
}

std::vector<PromptJob> cross_product(const TaskSet& tasks, std::span<const PromptTemplate> templates,
                                     std::span<const ModelTarget> models,
                                     std::span<const AblationVariant> variants, Pairing pairing, int steps) {
  if (pairing == Pairing::ByCategory) {
    for (const auto& t : templates) {
      if (!t.category) throw MissingTemplateForCategory("(template '" + t.id + "' declares none)");
    }
    for (const auto& task : tasks.tasks) {
      bool covered = std::any_of(templates.begin(), templates.end(),
                                 [&](const PromptTemplate& t) { return t.category == task.category; });
      if (!covered) throw MissingTemplateForCategory(std::string(to_string(task.category)));
    }
  }

  std::vector<PromptJob> jobs;
  const std::size_t per_model =
      pairing == Pairing::AllPairs ? templates.size() * tasks.tasks.size() * variants.size()
                                   : tasks.tasks.size() * variants.size();
  jobs.reserve(models.size() * per_model);
  for (const auto& m : models) {
    for (const auto& tpl : templates) {
      for (const auto& task : tasks.tasks) {
        if (pairing == Pairing::ByCategory && tpl.category != task.category) continue;
        for (auto v : variants) jobs.push_back({m.model_id, tpl.id, v, task.id, steps});
      }
    }
  }
  return jobs;
}

}  // namespace schemaprobe
