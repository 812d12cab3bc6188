#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "schemaprobe/error.hpp"
#include "schemaprobe/schema.hpp"
#include "schemaprobe/transcriber.hpp"
#include "support/test_support.hpp"

using namespace schemaprobe;

namespace {

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
  return n;
}

const char* kMinimalSpec = R"json({
  "id": "mini",
  "provenance": "core",
  "root": "Task",
  "query": "plan = Task.build(objective={task}, stage_count={steps})",
  "classes": {
    "Task": [
      {"name": "title", "kind": "text", "description": "name"},
      {"name": "stages", "kind": "ref-list:Stage", "description": "steps"}
    ],
    "Stage": [
      {"name": "summary", "kind": "text", "description": "one line"},
      {"name": "details", "kind": "text-list", "description": "actions"}
    ]
  }
})json";

bool has_rule(const ValidationReport& r, const std::string& rule) {
  return std::any_of(r.begin(), r.end(), [&](const Violation& v) { return v.rule == rule; });
}

}  // namespace

TEST_CASE("minimal Task/Stage spec parses") {
  auto s = parse_schema_spec(kMinimalSpec);
  CHECK(s.classes.size() == 2);
  CHECK(s.root_class == "Task");
  CHECK(s.find_class("Stage")->fields[1].kind == ValueKind::TextList);
  CHECK(s.find_class("Task")->fields[1].nested_class == "Stage");
  CHECK(validate_schema(s).empty());
}

TEST_CASE("unknown nested class is a reference error") {
  std::string spec = kMinimalSpec;
  spec.replace(spec.find("\"kind\": \"text-list\""), 19, "\"kind\": \"ref:Item\"");
  try {
    parse_schema_spec(spec);
    FAIL("expected ReferenceError");
  } catch (const ReferenceError& e) {
    CHECK(e.name() == "Item");
  }
}

TEST_CASE("syntax errors carry a line number") {
  CHECK_THROWS_AS(parse_schema_spec("{ \"id\": "), SyntaxError);
  std::string spec = kMinimalSpec;
  spec.replace(spec.find("\"kind\": \"text\""), 14, "\"kind\": \"blob\"");
  try {
    parse_schema_spec(spec);
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 8);
  }
}

TEST_CASE("duplicate keys in a spec are rejected") {
  std::string spec = kMinimalSpec;
  spec.replace(spec.find("\"root\""), 6, "\"id\": \"again\", \"root\"");
  CHECK_THROWS_AS(parse_schema_spec(spec), SyntaxError);
}

TEST_CASE("nesting cycle reports its path") {
  const char* spec = R"json({"id": "cyc", "root": "A", "query": "x = A({task})",
    "classes": {"A": [{"name": "b", "kind": "ref:B", "description": ""}],
                "B": [{"name": "a", "kind": "ref:A", "description": ""}]}})json";
  try {
    parse_schema_spec(spec);
    FAIL("expected CycleError");
  } catch (const CycleError& e) {
    CHECK(e.path() == std::vector<std::string>{"A", "B", "A"});
  }
}

TEST_CASE("validate_schema reports violations as data") {
  CHECK(validate_schema(core_task_schema()).empty());

  auto twice = core_task_schema();
  twice.query_template = "run({task}, {task})";
  auto r = validate_schema(twice);
  REQUIRE(r.size() == 1);
  CHECK(r[0].rule == "task-token-once");

  auto cyc = core_task_schema();
  cyc.classes[1].fields.push_back({"parent", "", ValueKind::Nested, "Task"});
  auto rc = validate_schema(cyc);
  REQUIRE(has_rule(rc, "no-cycle"));
  auto it = std::find_if(rc.begin(), rc.end(), [](const Violation& v) { return v.rule == "no-cycle"; });
  CHECK(it->path == std::vector<std::string>{"Task", "Stage", "Task"});

  auto bad = core_task_schema();
  bad.root_class = "Missing";
  bad.classes[0].fields.push_back({"title", "dup", ValueKind::Text, {}});
  bad.classes[1].fields[0].name = "has space";
  auto rb = validate_schema(bad);
  CHECK(has_rule(rb, "root-exists"));
  CHECK(has_rule(rb, "field-name-unique"));
  CHECK(has_rule(rb, "field-name-valid"));
}

TEST_CASE("demo schemas round-trip through their JSON form") {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(testsupport::repo_dir() / "data" / "schemas")) {
    auto a = load_schema_file(e.path().string());
    auto text = render_schema_spec(a);
    auto b = parse_schema_spec(text);
    CHECK(a == b);
    CHECK(render_schema_spec(b) == text);
    CHECK(a.provenance.derived);
    ++n;
  }
  CHECK(n == 10);
}

TEST_CASE("derive: added class referenced from Stage") {
  const auto before = core_task_schema();
  SchemaCustomization c;
  c.added_classes.push_back({"CodeBlock", {{"script", "program text", ValueKind::Text, {}}}});
  c.added_fields.push_back({"Stage", {{"code", "attached block", ValueKind::Nested, "CodeBlock"}}});
  auto d = derive_schema(core_task_schema(), c);
  CHECK(d.classes.size() == 3);
  CHECK(d.provenance == Provenance::derived_from("core-task-schema"));
  CHECK(d.id == "core-task-schema+custom");
  CHECK(validate_schema(d).empty());
  CHECK(core_task_schema() == before);
}

TEST_CASE("derive: empty customization is structurally the base") {
  auto d = derive_schema(core_task_schema(), {}, "copy");
  CHECK(structurally_equal(d, core_task_schema()));
  CHECK(d.id == "copy");
  CHECK(d.provenance.derived);
}

TEST_CASE("derive: renames apply before additions") {
  SchemaCustomization c;
  c.renamed.push_back({"Stage", "Phase"});
  c.added_fields.push_back({"Phase", {{"owner", "who runs it", ValueKind::Text, {}}}});
  auto d = derive_schema(core_task_schema(), c);
  CHECK(d.find_class("Phase") != nullptr);
  CHECK(d.find_class("Stage") == nullptr);
  CHECK(d.find_class("Task")->fields[2].nested_class == "Phase");
  CHECK(d.find_class("Phase")->fields.back().name == "owner");

  SchemaCustomization stale = c;
  stale.added_fields.push_back({"Stage", {{"late", "", ValueKind::Text, {}}}});
  CHECK_THROWS_AS(derive_schema(core_task_schema(), stale), ReferenceError);

  SchemaCustomization field;
  field.renamed.push_back({"Task.title", "headline"});
  auto f = derive_schema(core_task_schema(), field);
  CHECK(f.find_class("Task")->fields[0].name == "headline");

  SchemaCustomization dup;
  dup.added_classes.push_back({"Stage", {{"x", "", ValueKind::Text, {}}}});
  CHECK_THROWS_AS(derive_schema(core_task_schema(), dup), DuplicateError);

  SchemaCustomization loop;
  loop.added_fields.push_back({"Stage", {{"back", "", ValueKind::Nested, "Task"}}});
  CHECK_THROWS_AS(derive_schema(core_task_schema(), loop), CycleError);

  SchemaCustomization root_rename;
  root_rename.renamed.push_back({"Task", "Project"});
  auto r = derive_schema(core_task_schema(), root_rename);
  CHECK(r.root_class == "Project");
  CHECK(r.query_template.find("Project.build(") != std::string::npos);
}

TEST_CASE("snippet carries the task once and the step count") {
  const std::string task = "plan a community bake sale";
  auto out = render_schema_snippet(core_task_schema(), 5, task);
  CHECK(count_of(out, task) == 1);
  CHECK(out.find("stage_count=5") != std::string::npos);
  for (const auto& c : core_task_schema().classes) CHECK(out.find(c.name) != std::string::npos);
  CHECK(render_schema_snippet(core_task_schema(), 1, "x") == render_schema_snippet(core_task_schema(), 1, "x"));
}

TEST_CASE("snippet rejects bad inputs") {
  CHECK_THROWS_AS(render_schema_snippet(core_task_schema(), 0, "x"), InvalidSchema);
  CHECK_THROWS_AS(render_schema_snippet(core_task_schema(), 3, ""), InvalidSchema);
  auto bad = core_task_schema();
  bad.query_template = "no token";
  CHECK_THROWS_AS(render_schema_snippet(bad, 3, "x"), InvalidSchema);
}

TEST_CASE("quoted task stays recoverable from the snippet") {
  for (std::string task : {std::string("say \"hi\" to the team"), std::string("path C:\\temp\\new"),
                           std::string("two\nlines"), std::string("{steps} and {task} stay literal")}) {
    auto out = render_schema_snippet(core_task_schema(), 4, task);
    auto frags = transcribe_literals(out);
    CHECK(std::any_of(frags.begin(), frags.end(), [&](const Fragment& f) {
      return f.kind == FragmentKind::StringLiteral && f.text == task;
    }));
  }
}

TEST_CASE("escape_literal") {
  CHECK(escape_literal("plain") == "plain");
  CHECK(escape_literal("a\"b") == "a\\\"b");
  CHECK(escape_literal("a\\b") == "a\\\\b");
  CHECK(escape_literal("a\nb\tc\r") == "a\\nb\\tc\\r");
  CHECK(unescape_literal(escape_literal("mixed \"q\" \\ \n")) == "mixed \"q\" \\ \n");
}

TEST_CASE("property: parse-render-parse is identity on derived schemas") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    SchemaCustomization c;
    const int extra = static_cast<int>(rng() % 3);
    for (int k = 0; k < extra; ++k) {
      auto name = "Extra" + std::to_string(k);
      c.added_classes.push_back({name, {{"value", "v" + std::to_string(rng() % 100), ValueKind::Integer, {}}}});
      c.added_fields.push_back({"Stage", {{"ref" + std::to_string(k), "", ValueKind::NestedList, name}}});
    }
    if (rng() % 2) c.renamed.push_back({"Stage.summary", "gist"});
    const auto base = core_task_schema();
    auto d = derive_schema(base, c, "derived-" + std::to_string(i));
    CHECK(base == core_task_schema());
    CHECK(parse_schema_spec(render_schema_spec(d)) == d);
  }
}
