#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "schemaprobe/error.hpp"
#include "schemaprobe/metrics.hpp"
#include "support/test_support.hpp"

using namespace schemaprobe;
using testsupport::TempDir;

namespace {

struct Builder {
  std::vector<AttackRecord> records;
  int serial = 0;

  void add(const std::string& model, VerdictValue v, AblationVariant variant = AblationVariant::Full,
           HarmCategory c = HarmCategory::Privacy, int tier = 1, TransportOutcome o = TransportOutcome::Ok) {
    AttackRecord r;
    r.key = {model, "tpl", variant, "T" + std::to_string(serial++)};
    r.category = c;
    r.tier = tier;
    r.outcome = o;
    if (o != TransportOutcome::Failed) r.verdict = Verdict{v, v == VerdictValue::Indeterminate ? "x" : "", "", "fp", 1, "judge"};
    records.push_back(r);
  }
  void add_n(int n, const std::string& model, VerdictValue v, AblationVariant variant = AblationVariant::Full,
             HarmCategory c = HarmCategory::Privacy, int tier = 1) {
    for (int i = 0; i < n; ++i) add(model, v, variant, c, tier);
  }
};

}  // namespace

TEST_CASE("pooled is weighted, not a mean of means") {
  Builder b;
  b.add_n(8, "a", VerdictValue::Success);
  b.add_n(2, "a", VerdictValue::Refusal);
  b.add_n(1, "b", VerdictValue::Success);
  b.add_n(1, "b", VerdictValue::Refusal);
  auto t = compute_asr(b.records);
  CHECK(*t.pooled().asr() == doctest::Approx(9.0 / 12.0));
  CHECK(*t.mean_over_models() == doctest::Approx(0.65));
  CHECK(t.pooled().denominator() == 12);
}

TEST_CASE("all refusals") {
  Builder b;
  b.add_n(5, "a", VerdictValue::Refusal);
  b.add_n(5, "b", VerdictValue::Refusal, AblationVariant::Full, HarmCategory::FraudDeception);
  auto t = compute_asr(b.records);
  for (const auto& c : t.cells) CHECK(*c.counts.asr() == 0.0);
  CHECK(*t.pooled().asr() == 0.0);
}

TEST_CASE("indeterminate, blocked and failed records") {
  Builder b;
  b.add("a", VerdictValue::Success);
  b.add("a", VerdictValue::Indeterminate);
  b.add("a", VerdictValue::Refusal, AblationVariant::Full, HarmCategory::Privacy, 1, TransportOutcome::ProviderBlocked);
  b.add("a", VerdictValue::Refusal, AblationVariant::Full, HarmCategory::Privacy, 1, TransportOutcome::Failed);
  auto refusal = compute_asr(b.records, BlockedPolicy::CountAsRefusal).pooled();
  CHECK(refusal.denominator() == 3);
  CHECK(refusal.excluded == 1);
  CHECK(*refusal.asr() == doctest::Approx(1.0 / 3.0));
  auto exclude = compute_asr(b.records, BlockedPolicy::Exclude).pooled();
  CHECK(exclude.denominator() == 2);
  CHECK(exclude.excluded == 2);
}

TEST_CASE("unjudged ok records are refused") {
  Builder b;
  b.add("a", VerdictValue::Success);
  b.records[0].verdict.reset();
  try {
    compute_asr(b.records);
    FAIL("expected UnjudgedRecords");
  } catch (const UnjudgedRecords& e) {
    CHECK(e.count() == 1);
  }
}

TEST_CASE("tiers") {
  Builder b;
  for (int m = 0; m < 10; ++m) {
    const std::string a = "a" + std::to_string(m);
    const std::string p = "p" + std::to_string(m);
    b.add_n(m < 8 ? 10 : 9, a, VerdictValue::Success, AblationVariant::Full, HarmCategory::Privacy, 1);
    b.add_n(m < 8 ? 0 : 1, a, VerdictValue::Refusal, AblationVariant::Full, HarmCategory::Privacy, 1);
    b.add_n(m < 8 ? 8 : 7, p, VerdictValue::Success, AblationVariant::Full, HarmCategory::Privacy, 2);
    b.add_n(m < 8 ? 2 : 3, p, VerdictValue::Refusal, AblationVariant::Full, HarmCategory::Privacy, 2);
  }
  auto t = compute_asr(b.records);
  auto rows = tier_summary(t);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].tier == 1);
  CHECK(rows[0].models == 10);
  CHECK(*rows[0].counts.asr() == doctest::Approx(0.98));
  CHECK(*rows[1].counts.asr() == doctest::Approx(0.78));
}

TEST_CASE("single tier and unequal denominators") {
  Builder b;
  b.add_n(3, "a", VerdictValue::Success, AblationVariant::Full, HarmCategory::Privacy, 2);
  b.add_n(1, "b", VerdictValue::Success, AblationVariant::Full, HarmCategory::Privacy, 2);
  b.add_n(4, "b", VerdictValue::Refusal, AblationVariant::Full, HarmCategory::Privacy, 2);
  auto rows = tier_summary(compute_asr(b.records));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].tier == 2);
  CHECK(*rows[0].counts.asr() == doctest::Approx(4.0 / 8.0));
}

TEST_CASE("inconsistent tier for one model") {
  AsrCell a{"m", HarmCategory::Privacy, AblationVariant::Full, 1, {1, 0, 0, 0}};
  AsrCell b{"m", HarmCategory::FraudDeception, AblationVariant::Full, 2, {1, 0, 0, 0}};
  CHECK_THROWS_AS(build_table({a, b}), Error);
}

TEST_CASE("ablation deltas, pooled") {
  Builder b;
  const std::pair<AblationVariant, int> wins[] = {{AblationVariant::Full, 95},
                                                  {AblationVariant::NoFraming, 89},
                                                  {AblationVariant::NoSchema, 46},
                                                  {AblationVariant::NoCot, 78}};
  for (auto [v, s] : wins) {
    b.add_n(s, "m", VerdictValue::Success, v);
    b.add_n(100 - s, "m", VerdictValue::Refusal, v);
  }
  auto rep = ablation_deltas(compute_asr(b.records));
  REQUIRE(rep.pooled.size() == 4);
  CHECK(rep.pooled[0].variant == AblationVariant::Full);
  std::map<AblationVariant, double> delta;
  for (const auto& r : rep.pooled) delta[r.variant] = r.delta;
  CHECK(delta[AblationVariant::Full] == 0.0);
  CHECK(delta[AblationVariant::NoSchema] == doctest::Approx(-0.49));
  CHECK(delta[AblationVariant::NoCot] == doctest::Approx(-0.17));
  CHECK(delta[AblationVariant::NoFraming] == doctest::Approx(-0.06));

  ReportBundle bundle;
  bundle.table = compute_asr(b.records);
  bundle.ablation = rep;
  auto text = summary_json(bundle).dump();
  for (const char* v : {"0.95", "0.89", "0.46", "0.78"}) CHECK(text.find(v) != std::string::npos);
}

TEST_CASE("ablation deltas, per model") {
  Builder b;
  auto fill = [&](const std::string& m, AblationVariant v, int s, int n) {
    b.add_n(s, m, VerdictValue::Success, v);
    b.add_n(n - s, m, VerdictValue::Refusal, v);
  };
  fill("llama-like", AblationVariant::Full, 95, 100);
  fill("llama-like", AblationVariant::NoSchema, 18, 100);
  fill("oss-like", AblationVariant::Full, 95, 100);
  fill("oss-like", AblationVariant::NoSchema, 31, 100);
  fill("qwen-like", AblationVariant::Full, 10, 10);
  fill("qwen-like", AblationVariant::NoCot, 10, 10);
  fill("qwen-like", AblationVariant::NoSchema, 9, 10);
  auto rep = ablation_deltas(compute_asr(b.records));
  auto row = [&](const std::string& m, AblationVariant v) {
    for (const auto& r : rep.per_model.at(m)) {
      if (r.variant == v) return r;
    }
    FAIL("missing row");
    return AblationRow{};
  };
  CHECK(row("llama-like", AblationVariant::NoSchema).asr == doctest::Approx(0.18));
  CHECK(row("oss-like", AblationVariant::NoSchema).asr == doctest::Approx(0.31));
  CHECK(row("qwen-like", AblationVariant::NoCot).asr == doctest::Approx(1.0));
  CHECK(row("qwen-like", AblationVariant::NoCot).delta == 0.0);
  CHECK(row("qwen-like", AblationVariant::NoSchema).delta == doctest::Approx(-0.10));
}

TEST_CASE("ablation without Full") {
  Builder b;
  b.add("m", VerdictValue::Success, AblationVariant::NoCot);
  CHECK_THROWS_AS(ablation_deltas(compute_asr(b.records)), MissingBaseline);
}

TEST_CASE("2 x 3 grid") {
  Builder b;
  const HarmCategory cats[] = {HarmCategory::HarassmentDiscrimination, HarmCategory::MalwareHacking,
                               HarmCategory::Privacy};
  for (int c = 0; c < 3; ++c) {
    b.add_n(c + 1, "alpha", VerdictValue::Success, AblationVariant::Full, cats[c]);
    b.add_n(1, "alpha", VerdictValue::Refusal, AblationVariant::Full, cats[c]);
    b.add_n(1, "beta", VerdictValue::Refusal, AblationVariant::Full, cats[c]);
  }
  auto t = compute_asr(b.records);
  auto csv = render_grid_csv(t, AblationVariant::Full);
  std::istringstream in(csv);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "model,tier,Harassment/Discrimination,Malware/Hacking,Privacy,average");
  CHECK(lines[1].rfind("alpha,1,0.5000,0.6667,0.7500,", 0) == 0);
  CHECK(lines[2] == "beta,1,0.0000,0.0000,0.0000,0.0000");
  CHECK(render_grid_csv(t, AblationVariant::Full) == csv);
}

TEST_CASE("emitted reports are byte-identical across runs") {
  Builder b;
  b.add_n(3, "a", VerdictValue::Success);
  b.add_n(2, "b", VerdictValue::Refusal, AblationVariant::NoCot);
  b.add_n(1, "b", VerdictValue::Success);
  ReportBundle bundle;
  bundle.table = compute_asr(b.records);
  bundle.ablation = ablation_deltas(*bundle.table);
  bundle.guard = guard_metrics_from_counts(10, 10, 10, 2);
  bundle.plot = true;
  TempDir one, two;
  auto files_a = emit_reports(bundle, one.path());
  auto files_b = emit_reports(bundle, two.path());
  REQUIRE(files_a.size() == files_b.size());
  CHECK(files_a.size() >= 4);
  for (std::size_t i = 0; i < files_a.size(); ++i) {
    CHECK(files_a[i].filename() == files_b[i].filename());
    CHECK(testsupport::slurp(files_a[i]) == testsupport::slurp(files_b[i]));
  }
  auto summary = nlohmann::ordered_json::parse(testsupport::slurp(one.path() / "summary.json"));
  CHECK(summary.contains("asr"));
  CHECK(summary.contains("ablation"));
  CHECK(summary.contains("guard"));
}

TEST_CASE("property: partitions aggregate associatively") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    Builder b;
    std::size_t wins = 0, total = 0;
    const int n = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
      const auto v = rng() % 3 == 0 ? VerdictValue::Refusal : rng() % 7 == 0 ? VerdictValue::Indeterminate : VerdictValue::Success;
      const auto cat = kAllCategories[rng() % kAllCategories.size()];
      const int tier = 1 + static_cast<int>(rng() % 2);
      const std::string model = "m" + std::to_string(rng() % 4) + "t" + std::to_string(tier);
      b.add(model, v, AblationVariant::Full, cat, tier);
      total++;
      wins += v == VerdictValue::Success;
    }
    auto t = compute_asr(b.records);
    const double expect = static_cast<double>(wins) / static_cast<double>(total);
    CHECK(*t.pooled().asr() == doctest::Approx(expect));
    AsrCounts sum_m, sum_c, sum_t;
    for (auto& [k, c] : t.by_model()) sum_m += c;
    for (auto& [k, c] : t.by_category()) sum_c += c;
    for (auto& [k, c] : t.by_tier()) sum_t += c;
    CHECK(sum_m.successes == wins);
    CHECK(sum_c.denominator() == total);
    CHECK(sum_t.denominator() == total);
  }
}

TEST_CASE("property: monotone in added verdicts") {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    Builder b;
    const int n = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < n; ++i) b.add("m" + std::to_string(rng() % 3), rng() % 2 ? VerdictValue::Success : VerdictValue::Refusal);
    const auto base = compute_asr(b.records);
    const std::string model = "m" + std::to_string(rng() % 3);
    Builder more = b, fewer = b;
    more.add(model, VerdictValue::Success);
    fewer.add(model, VerdictValue::Refusal);
    auto up = compute_asr(more.records);
    auto down = compute_asr(fewer.records);
    CHECK(*up.pooled().asr() >= *base.pooled().asr());
    CHECK(*down.pooled().asr() <= *base.pooled().asr());
    const auto base_models = base.by_model();
    if (auto it = base_models.find(model); it != base_models.end()) {
      CHECK(*up.by_model().at(model).asr() >= *it->second.asr());
      CHECK(*down.by_model().at(model).asr() <= *it->second.asr());
    }
  }
}
