// Knowledge maps: construction from sweep results, tie-band summaries,
// top-k queries, persistence round-trips, and report rendering.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "autogets/knowledge.hpp"
#include "autogets/report.hpp"
#include "support/fixture.hpp"
#include "support/toy.hpp"

using namespace autogets;
using testsupport::SearchFixture;

namespace {

// Hand-built map entries with explicit deltas, for the summary/query/
// persistence contracts that do not need a real sweep behind them.
MapEntry make_entry(Strategy s, MetricKind k, const ClassId& cls,
                    const std::vector<ClassId>& schema) {
  MapEntry e;
  e.strategy = s;
  e.objective = metric_kind_is_overall(k) ? MetricId{k, {}} : MetricId{k, cls};
  e.example_class = cls;
  e.deltas.schema = schema;
  e.deltas.cr.assign(schema.size(), {});
  e.deltas.cba.assign(schema.size(), {});
  return e;
}

void set_delta(MapEntry& e, const MetricId& id, double value,
               bool infinite = false) {
  Delta d{value, infinite};
  switch (id.kind) {
    case MetricKind::OBA: e.deltas.oba = d; return;
    case MetricKind::OF1: e.deltas.of1 = d; return;
    default: break;
  }
  for (size_t i = 0; i < e.deltas.schema.size(); ++i) {
    if (e.deltas.schema[i] != id.cls) continue;
    (id.kind == MetricKind::CR ? e.deltas.cr : e.deltas.cba)[i] = d;
    return;
  }
  FAIL("set_delta: class not in schema");
}

// Sets the entry's own-objective delta.
void set_own(MapEntry& e, double value, bool infinite = false) {
  set_delta(e, e.objective, value, infinite);
}

bool entries_equal(const MapEntry& a, const MapEntry& b) {
  if (a.key() != b.key()) return false;
  if (a.best_value != b.best_value || a.baseline_value != b.baseline_value)
    return false;
  if (a.deltas.schema != b.deltas.schema) return false;
  ScoreVector probe;
  probe.schema = a.deltas.schema;
  for (const auto& id : probe.ids()) {
    Delta da = a.deltas.get(id), db = b.deltas.get(id);
    if (da.infinite != db.infinite) return false;
    if (!da.infinite && da.value != db.value) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("build_map folds a sweep into one entry per successful setting") {
  SearchFixture fx(toy::separable(2, 16));
  SweepGrid grid;
  grid.classes = {"c00", "c01"};
  auto outcomes = sweep(grid, fx.ctx, {3, std::nullopt}, 7);
  REQUIRE(outcomes.size() == 24);  // 3 strategies x 4 metrics x 2 classes

  auto map = build_map(outcomes, fx.baseline_scores, "dhash", "chash", 3);
  REQUIRE(map.entries.size() == 24);
  REQUIRE(map.schema == fx.baseline_scores.schema);
  REQUIRE(map.dataset_hash == "dhash");
  REQUIRE(map.config_hash == "chash");
  REQUIRE(map.budget == 3);

  std::set<std::string> keys;
  for (const auto& e : map.entries) {
    REQUIRE(keys.insert(e.key()).second);
    // The own-objective delta equals the run's own improvement.
    const SweepOutcome* oc = nullptr;
    for (const auto& o : outcomes)
      if (o.setting.key() == e.key()) oc = &o;
    REQUIRE(oc != nullptr);
    Delta own = e.deltas.get(e.objective);
    Delta expect = delta_of(oc->result.baseline_value, oc->result.best_value);
    REQUIRE(own.infinite == expect.infinite);
    if (!own.infinite) REQUIRE(own.value == Catch::Approx(expect.value));
  }
}

TEST_CASE("build_map skips failed settings and rejects mixed baselines") {
  SearchFixture fx(toy::separable(2, 16));
  SweepGrid grid;
  grid.strategies = {Strategy::SW};
  grid.metrics = {MetricKind::CR};
  grid.classes = {"c00", "ghost"};
  auto outcomes = sweep(grid, fx.ctx, {2, std::nullopt}, 7);
  REQUIRE(outcomes.size() == 2);
  REQUIRE(outcomes[1].failed);

  auto map = build_map(outcomes, fx.baseline_scores);
  REQUIRE(map.entries.size() == 1);
  REQUIRE(map.entries[0].key() == "SW|CR|c00");

  // Tamper one result's baseline: build_map must refuse the mix.
  outcomes[0].result.baseline_scores.oba.value += 0.25;
  REQUIRE_THROWS_WITH(build_map(outcomes, fx.baseline_scores),
                      Catch::Matchers::ContainsSubstring("mixed baselines"));
}

TEST_CASE("a sweep that cannot improve anything yields all-zero deltas") {
  SearchFixture fx(toy::separable(2, 16));
  MockGenerator empty_backend(true);
  fx.ctx.backend = &empty_backend;
  SweepGrid grid;
  grid.strategies = {Strategy::SW, Strategy::GA};
  grid.metrics = {MetricKind::CR, MetricKind::OBA};
  grid.classes = {"c00", "c01"};

  auto map = build_map(sweep(grid, fx.ctx, {2, std::nullopt}, 7),
                       fx.baseline_scores);
  REQUIRE(map.entries.size() == 8);
  ScoreVector probe;
  probe.schema = map.schema;
  for (const auto& e : map.entries)
    for (const auto& id : probe.ids()) {
      Delta d = e.deltas.get(id);
      REQUIRE_FALSE(d.infinite);
      REQUIRE(d.value == 0.0);
    }
}

TEST_CASE("upsert keeps at most one entry per setting") {
  std::vector<ClassId> schema = {"a", "b"};
  KnowledgeMap map;
  map.schema = schema;
  auto e1 = make_entry(Strategy::SW, MetricKind::CR, "a", schema);
  e1.best_value = 0.5;
  map.upsert(e1);
  auto e2 = e1;
  e2.best_value = 0.9;
  map.upsert(e2);
  REQUIRE(map.entries.size() == 1);
  REQUIRE(map.entries[0].best_value == 0.9);
  REQUIRE(map.find("SW|CR|a") != nullptr);
  REQUIRE(map.find("GA|CR|a") == nullptr);
}

TEST_CASE("tie band selects every strategy within 0.03 points of the best") {
  std::vector<ClassId> schema = {"a", "b"};
  KnowledgeMap map;
  map.schema = schema;

  SECTION("0.02 gap is inside the band, 0.04 gap is outside") {
    auto sw = make_entry(Strategy::SW, MetricKind::CR, "a", schema);
    auto hsw = make_entry(Strategy::HSW, MetricKind::CR, "a", schema);
    auto ga = make_entry(Strategy::GA, MetricKind::CR, "a", schema);
    set_own(sw, 5.00);
    set_own(hsw, 4.98);
    set_own(ga, 4.00);
    map.upsert(sw);
    map.upsert(hsw);
    map.upsert(ga);

    auto sw_b = make_entry(Strategy::SW, MetricKind::CR, "b", schema);
    auto hsw_b = make_entry(Strategy::HSW, MetricKind::CR, "b", schema);
    set_own(sw_b, 5.00);
    set_own(hsw_b, 4.96);
    map.upsert(sw_b);
    map.upsert(hsw_b);

    auto summary = summarize_best(map, 0.03);
    auto cell_a = summary.cells.at({MetricId{MetricKind::CR, "a"}, "a"});
    REQUIRE(cell_a == std::set<std::string>{"SW", "HSW"});
    auto cell_b = summary.cells.at({MetricId{MetricKind::CR, "b"}, "b"});
    REQUIRE(cell_b == std::set<std::string>{"SW"});
  }

  SECTION("infinite outranks finite and ties with infinite") {
    auto sw = make_entry(Strategy::SW, MetricKind::OF1, "a", schema);
    auto hsw = make_entry(Strategy::HSW, MetricKind::OF1, "a", schema);
    set_own(sw, 0.0, true);
    set_own(hsw, 40.0);
    map.upsert(sw);
    map.upsert(hsw);
    auto summary = summarize_best(map);
    REQUIRE(summary.cells.at({MetricId{MetricKind::OF1, {}}, "a"}) ==
            std::set<std::string>{"SW"});

    auto ga = make_entry(Strategy::GA, MetricKind::OF1, "a", schema);
    set_own(ga, 0.0, true);
    map.upsert(ga);
    summary = summarize_best(map);
    REQUIRE(summary.cells.at({MetricId{MetricKind::OF1, {}}, "a"}) ==
            std::set<std::string>{"SW", "GA"});
  }

  SECTION("single strategy gives a singleton even when its delta is negative") {
    auto ga = make_entry(Strategy::GA, MetricKind::OBA, "b", schema);
    set_own(ga, -3.5);
    map.upsert(ga);
    auto summary = summarize_best(map);
    REQUIRE(summary.cells.at({MetricId{MetricKind::OBA, {}}, "b"}) ==
            std::set<std::string>{"GA"});
  }

  SECTION("empty map gives an empty summary") {
    REQUIRE(summarize_best(map).cells.empty());
  }

  SECTION("negative band is rejected") {
    REQUIRE_THROWS_AS(summarize_best(map, -0.01), ConfigError);
  }
}

TEST_CASE("widening the band never shrinks a summary cell") {
  std::vector<ClassId> schema = {"a", "b", "c"};
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    KnowledgeMap map;
    map.schema = schema;
    for (Strategy s : {Strategy::SW, Strategy::HSW, Strategy::GA})
      for (const auto& cls : schema) {
        auto e = make_entry(s, MetricKind::CR, cls, schema);
        if (rng.chance(0.1))
          set_own(e, 0.0, true);
        else
          set_own(e, -10.0 + 20.0 * rng.real());
        map.upsert(e);
      }
    double narrow = rng.real() * 2.0;
    double wide = narrow + rng.real() * 3.0;
    auto s_narrow = summarize_best(map, narrow);
    auto s_wide = summarize_best(map, wide);
    for (const auto& [key, members] : s_narrow.cells) {
      const auto& wider = s_wide.cells.at(key);
      for (const auto& m : members) REQUIRE(wider.count(m) == 1);
      REQUIRE_FALSE(members.empty());
    }
  }
}

TEST_CASE("top-k ranks improving entries best-first with deterministic ties") {
  std::vector<ClassId> schema = {"a", "b"};
  KnowledgeMap map;
  map.schema = schema;
  MetricId target{MetricKind::CR, "a"};

  // Four entries with target deltas 3.0, 7.0, -1.0, 7.0.
  auto e1 = make_entry(Strategy::SW, MetricKind::CR, "a", schema);
  set_delta(e1, target, 3.0);
  auto e2 = make_entry(Strategy::HSW, MetricKind::OF1, "b", schema);
  set_delta(e2, target, 7.0);
  auto e3 = make_entry(Strategy::GA, MetricKind::CBA, "b", schema);
  set_delta(e3, target, -1.0);
  auto e4 = make_entry(Strategy::GA, MetricKind::CR, "b", schema);
  set_delta(e4, target, 7.0);
  for (const auto& e : {e1, e2, e3, e4}) map.upsert(e);

  SECTION("k=2 returns the two 7.0 entries in tie-break order") {
    auto top = query_top_k(map, target, 2);
    REQUIRE(top.size() == 2);
    // Tie on 7.0 resolved by strategy name: GA before HSW.
    REQUIRE(top[0].setting.key() == "GA|CR|b");
    REQUIRE(top[1].setting.key() == "HSW|OF1|b");
    REQUIRE(top[0].delta.value == 7.0);
  }

  SECTION("k beyond the positive entries returns only the positives") {
    auto top = query_top_k(map, target, 10);
    REQUIRE(top.size() == 3);
    REQUIRE(top[2].setting.key() == "SW|CR|a");
    for (size_t i = 1; i < top.size(); ++i)
      REQUIRE(top[i - 1].delta.value >= top[i].delta.value);
  }

  SECTION("infinite entries rank first") {
    auto e5 = make_entry(Strategy::SW, MetricKind::OBA, "b", schema);
    set_delta(e5, target, 0.0, true);
    map.upsert(e5);
    auto top = query_top_k(map, target, 4);
    REQUIRE(top[0].setting.key() == "SW|OBA|b");
    REQUIRE(top[0].delta.infinite);
  }

  SECTION("no positive entries yields an empty list") {
    KnowledgeMap bare;
    bare.schema = schema;
    auto e = make_entry(Strategy::SW, MetricKind::CR, "a", schema);
    set_delta(e, target, -5.0);
    bare.upsert(e);
    REQUIRE(query_top_k(bare, target, 3).empty());
  }

  SECTION("k must be positive") {
    REQUIRE_THROWS_AS(query_top_k(map, target, 0), ConfigError);
  }

  SECTION("ranking is stable under reserialization") {
    auto before = query_top_k(map, target, 4);
    auto reloaded = parse_map(serialize_map(map));
    auto after = query_top_k(reloaded, target, 4);
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i)
      REQUIRE(before[i].setting.key() == after[i].setting.key());
  }
}

TEST_CASE("maps survive a serialize/parse round trip losslessly") {
  SearchFixture fx(toy::separable(2, 16));
  SweepGrid grid;
  grid.classes = {"c00", "c01"};
  auto map = build_map(sweep(grid, fx.ctx, {3, std::nullopt}, 7),
                       fx.baseline_scores, "f00ddeadbeef1234", "cfg42", 3);

  std::string text = serialize_map(map);
  auto reloaded = parse_map(text);

  REQUIRE(reloaded.schema == map.schema);
  REQUIRE(reloaded.dataset_hash == map.dataset_hash);
  REQUIRE(reloaded.config_hash == map.config_hash);
  REQUIRE(reloaded.budget == map.budget);
  REQUIRE(reloaded.entries.size() == map.entries.size());
  for (size_t i = 0; i < map.entries.size(); ++i)
    REQUIRE(entries_equal(map.entries[i], reloaded.entries[i]));

  // Byte-stable: a second serialization is identical.
  REQUIRE(serialize_map(reloaded) == text);
}

TEST_CASE("infinite deltas round-trip through the map file") {
  std::vector<ClassId> schema = {"a", "b"};
  KnowledgeMap map;
  map.schema = schema;
  auto e = make_entry(Strategy::GA, MetricKind::CR, "a", schema);
  set_own(e, 0.0, true);
  set_delta(e, {MetricKind::OF1, {}}, -12.5);
  e.baseline_value = 0.0;
  e.best_value = 0.75;
  map.upsert(e);

  auto reloaded = parse_map(serialize_map(map));
  REQUIRE(reloaded.entries.size() == 1);
  REQUIRE(entries_equal(map.entries[0], reloaded.entries[0]));
  REQUIRE(reloaded.entries[0].deltas.get({MetricKind::CR, "a"}).infinite);
  REQUIRE(reloaded.entries[0].deltas.get({MetricKind::OF1, {}}).value == -12.5);
}

TEST_CASE("map files are validated on load") {
  std::vector<ClassId> schema = {"a"};
  KnowledgeMap map;
  map.schema = schema;
  map.upsert(make_entry(Strategy::SW, MetricKind::CR, "a", schema));
  std::string good = serialize_map(map);

  SECTION("wrong magic") {
    REQUIRE_THROWS_WITH(parse_map("# other-file v9\n" + good),
                        Catch::Matchers::ContainsSubstring("header magic"));
  }
  SECTION("wrong version") {
    std::string bad = good;
    bad.replace(bad.find("v1"), 2, "v2");
    REQUIRE_THROWS_AS(parse_map(bad), ParseError);
  }
  SECTION("missing provenance line") {
    std::string bad = good;
    auto at = bad.find("# config: ");
    bad.erase(at, bad.find('\n', at) - at + 1);
    REQUIRE_THROWS_WITH(parse_map(bad),
                        Catch::Matchers::ContainsSubstring("provenance incomplete"));
  }
  SECTION("malformed header row") {
    std::string bad = good;
    auto at = bad.find("strategy\t");
    bad.replace(at, 8, "strategx");
    REQUIRE_THROWS_WITH(parse_map(bad),
                        Catch::Matchers::ContainsSubstring("header malformed"));
  }
  SECTION("row with wrong field count") {
    std::string bad = good + "SW\tCR:a\ta\n";
    REQUIRE_THROWS_WITH(parse_map(bad),
                        Catch::Matchers::ContainsSubstring("fields, expected"));
  }
}

TEST_CASE("loaded maps are checked against the current dataset") {
  std::vector<ClassId> schema = {"a", "b"};
  KnowledgeMap map;
  map.schema = schema;
  map.dataset_hash = "1111";

  SECTION("matching schema and hash pass silently") {
    std::vector<std::string> warnings;
    check_map(map, schema, "1111", false, &warnings);
    REQUIRE(warnings.empty());
  }
  SECTION("schema mismatch names the first differing class") {
    REQUIRE_THROWS_WITH(check_map(map, {"a", "zzz"}, "1111", false),
                        Catch::Matchers::ContainsSubstring("'b'") &&
                            Catch::Matchers::ContainsSubstring("'zzz'"));
  }
  SECTION("extra class in map") {
    REQUIRE_THROWS_WITH(check_map(map, {"a"}, "1111", false),
                        Catch::Matchers::ContainsSubstring("extra class 'b'"));
  }
  SECTION("missing class in map") {
    REQUIRE_THROWS_WITH(check_map(map, {"a", "b", "c"}, "1111", false),
                        Catch::Matchers::ContainsSubstring("lacks class 'c'"));
  }
  SECTION("dataset hash mismatch errors without force") {
    REQUIRE_THROWS_WITH(check_map(map, schema, "2222", false),
                        Catch::Matchers::ContainsSubstring("different dataset"));
  }
  SECTION("force downgrades the hash mismatch to a warning") {
    std::vector<std::string> warnings;
    check_map(map, schema, "2222", true, &warnings);
    REQUIRE(warnings.size() == 1);
    REQUIRE(warnings[0].find("advisory") != std::string::npos);
  }
}

TEST_CASE("full-grid reports render two summaries plus twelve cross-impact tables") {
  SearchFixture fx(toy::separable(2, 16));
  SweepGrid grid;
  grid.classes = {"c00", "c01"};
  auto map = build_map(sweep(grid, fx.ctx, {3, std::nullopt}, 7),
                       fx.baseline_scores);

  auto tables = build_report_tables(map, fx.baseline_scores);
  REQUIRE(tables.size() == 14);
  REQUIRE(cross_impact_tables(map, fx.baseline_scores).size() == 12);

  // Each cross-impact table: one row per example class plus the baseline
  // row appended last with absolute values.
  for (size_t i = 2; i < tables.size(); ++i) {
    const auto& t = tables[i];
    REQUIRE(t.rows.size() == 3);
    REQUIRE(t.rows.back().front() == "baseline");
    REQUIRE(t.header.front() == "examples");
    REQUIRE(t.header.back() == "flags");
    // Columns: examples + CR per class + CBA per class + OBA + OF1 + flags.
    REQUIRE(t.header.size() == 1 + 2 + 2 + 1 + 1 + 1);
  }

  // Baseline row restates absolute scores to four decimal places.
  const auto& base_row = tables[2].rows.back();
  char expect[32];
  std::snprintf(expect, sizeof(expect), "%.4f",
                fx.baseline_scores.cr[0].value);
  REQUIRE(base_row[1] == expect);
}

TEST_CASE("report cells flag negatives and render infinities as hash marks") {
  std::vector<ClassId> schema = {"a", "b"};
  KnowledgeMap map;
  map.schema = schema;
  auto e = make_entry(Strategy::SW, MetricKind::CR, "a", schema);
  set_own(e, 0.0, true);
  set_delta(e, {MetricKind::CR, "b"}, -4.2);
  map.upsert(e);
  auto tidy = make_entry(Strategy::SW, MetricKind::CR, "b", schema);
  set_own(tidy, 2.0);
  map.upsert(tidy);

  ScoreVector baseline;
  baseline.schema = schema;
  baseline.cr = {{0.5, true}, {0.25, true}};
  baseline.cba = {{0.5, true}, {0.5, true}};
  baseline.oba = {0.5, true};
  baseline.of1 = {0.5, true};

  auto tables = cross_impact_tables(map, baseline);
  REQUIRE(tables.size() == 1);
  const auto& t = tables[0];
  REQUIRE(t.title == "Cross-impact: SW optimizing CR");
  // Row for examples=a: dCR:a is infinite, dCR:b is negative -> flagged.
  REQUIRE(t.rows[0][0] == "a");
  REQUIRE(t.rows[0][1] == "######");
  REQUIRE(t.rows[0][2] == "-4.20");
  REQUIRE(t.rows[0].back() == "-");
  // Row for examples=b has no negative cells -> no flag.
  REQUIRE(t.rows[1][0] == "b");
  REQUIRE(t.rows[1].back() == "");
  // Baseline row carries absolute values, never flags.
  REQUIRE(t.rows[2][0] == "baseline");
  REQUIRE(t.rows[2][1] == "0.5000");
  REQUIRE(t.rows[2].back() == "");

  auto grid = delta_grid_table(map);
  REQUIRE(grid.header.front() == "class");
  REQUIRE(grid.header.back() == "flags");
  REQUIRE(grid.rows[0][1] == "######");

  auto summary = best_summary_table(map);
  REQUIRE(summary.rows[0][0] == "a");
  REQUIRE(summary.rows[0][1] == "SW");
}

TEST_CASE("summary cells list strategies in canonical order") {
  std::vector<ClassId> schema = {"a"};
  KnowledgeMap map;
  map.schema = schema;
  for (Strategy s : {Strategy::GA, Strategy::SW, Strategy::HSW}) {
    auto e = make_entry(s, MetricKind::CR, "a", schema);
    set_own(e, 5.0);  // three-way tie
    map.upsert(e);
  }
  auto summary = best_summary_table(map);
  REQUIRE(summary.rows[0][1] == "SW, HSW, GA");
}

TEST_CASE("markdown and TSV renderings agree on content") {
  std::vector<ClassId> schema = {"a|pipe"};
  KnowledgeMap map;
  map.schema = schema;
  auto e = make_entry(Strategy::SW, MetricKind::CR, "a|pipe", schema);
  set_own(e, 1.5);
  map.upsert(e);
  ScoreVector baseline;
  baseline.schema = schema;
  baseline.cr = {{1.0, true}};
  baseline.cba = {{1.0, true}};
  baseline.oba = {1.0, true};
  baseline.of1 = {1.0, true};

  auto tables = build_report_tables(map, baseline);
  std::string md = report_markdown(tables, "Sweep report");
  std::string tsv = report_tsv(tables);

  REQUIRE(md.find("# Sweep report") == 0);
  REQUIRE(md.find("## Improvement grid") != std::string::npos);
  REQUIRE(md.find("a\\|pipe") != std::string::npos);  // pipes escaped in md

  REQUIRE(tsv.find("# table: Improvement grid") != std::string::npos);
  // Every table's header and rows parse back as TSV with equal widths.
  for (const auto& t : tables) {
    auto parsed = parse_tsv(table_to_tsv(t), true);
    REQUIRE(parsed.size() == t.rows.size() + 1);
    for (const auto& row : parsed)
      REQUIRE(row.fields.size() == t.header.size());
  }
}
