#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "autogets/metrics.hpp"
#include "support/oracle.hpp"
#include "support/toy.hpp"

using namespace autogets;

namespace {

PredictionSet preds_from(const LabeledDataset& truth,
                         const std::vector<ClassId>& labels) {
  PredictionSet p;
  for (size_t i = 0; i < truth.messages.size(); ++i)
    p.by_id[truth.messages[i].id] = labels[i];
  return p;
}

}  // namespace

TEST_CASE("confusion matches the hand-enumerated 3-item example") {
  auto truth = toy::from_rows({{"A", "1"}, {"A", "2"}, {"B", "3"}});
  auto preds = preds_from(truth, {"A", "B", "B"});
  auto counts = confusion(truth, preds);
  const auto& a = counts.per_class.at("A");
  REQUIRE(a.tp == 1);
  REQUIRE(a.fn == 1);
  REQUIRE(a.fp == 0);
  REQUIRE(a.tn == 1);
  const auto& b = counts.per_class.at("B");
  REQUIRE(b.tp == 1);
  REQUIRE(b.fp == 1);
  REQUIRE(b.fn == 0);
  REQUIRE(b.tn == 1);
}

TEST_CASE("all-correct predictions have zero FP and FN") {
  auto truth = toy::from_rows({{"A", "1"}, {"B", "2"}, {"B", "3"}});
  auto preds = preds_from(truth, {"A", "B", "B"});
  auto counts = confusion(truth, preds);
  for (const auto& [cls, cell] : counts.per_class) {
    REQUIRE(cell.fp == 0);
    REQUIRE(cell.fn == 0);
  }
  auto sv = score_vector(truth, preds);
  for (const auto& id : sv.ids()) {
    REQUIRE(sv.get(id).defined);
    REQUIRE(sv.get(id).value == 1.0);
  }
}

TEST_CASE("empty dataset yields all-zero counts") {
  LabeledDataset truth;
  truth.schema = {"A", "B"};
  auto counts = confusion(truth, PredictionSet{});
  REQUIRE(counts.evaluated == 0);
  REQUIRE(counts.pooled.total() == 0);
}

TEST_CASE("coverage mismatch lists missing and extra ids") {
  auto truth = toy::from_rows({{"A", "1"}, {"B", "2"}});
  PredictionSet p;
  p.by_id["m0"] = "A";
  p.by_id["zz"] = "B";
  try {
    confusion(truth, p);
    FAIL("expected coverage error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    REQUIRE(msg.find("m1") != std::string::npos);
    REQUIRE(msg.find("zz") != std::string::npos);
  }
}

TEST_CASE("metric formulas match spelled-out arithmetic") {
  ConfusionCell c{5, 0, 0, 5};
  REQUIRE(recall_value(c).value == 0.5);

  ConfusionCell perfect{1, 0, 1, 0};
  REQUIRE(cba_value(perfect, CbaVariant::printed).value == 1.0);

  ConfusionCell pooled{8, 2, 88, 2};
  REQUIRE(of1_value(pooled).value == 16.0 / 20.0);
  double expect_oba = 0.5 * (8.0 / 10.0 + 88.0 / 90.0);
  REQUIRE(std::abs(oba_value(pooled, CbaVariant::printed).value - expect_oba) < 1e-15);
}

TEST_CASE("confusion and metrics agree with the brute-force oracle") {
  Rng rng(2024);
  std::vector<std::string> classes = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 200; ++trial) {
    size_t n_classes = 2 + rng.below(4);
    size_t n_items = 1 + rng.below(50);
    std::vector<oracle::Pair> items;
    std::vector<std::pair<std::string, std::string>> rows;
    std::vector<ClassId> pred_labels;
    for (size_t i = 0; i < n_items; ++i) {
      std::string t = classes[rng.index(n_classes)];
      std::string p = classes[rng.index(n_classes)];
      items.push_back({t, p});
      rows.push_back({t, "text" + std::to_string(i)});
      pred_labels.push_back(p);
    }
    // Every class must appear in truth at least once for a stable schema.
    for (size_t c = 0; c < n_classes; ++c) {
      items.push_back({classes[c], classes[c]});
      rows.push_back({classes[c], "pad" + std::to_string(c)});
      pred_labels.push_back(classes[c]);
    }
    auto truth = toy::from_rows(rows);
    auto preds = preds_from(truth, pred_labels);
    auto counts = confusion(truth, preds);
    auto expected = oracle::confusion(items, truth.schema);
    for (const auto& cls : truth.schema) {
      const auto& got = counts.per_class.at(cls);
      const auto& want = expected.at(cls);
      REQUIRE(got.tp == want.tp);
      REQUIRE(got.fp == want.fp);
      REQUIRE(got.tn == want.tn);
      REQUIRE(got.fn == want.fn);

      double want_recall = oracle::recall(want);
      if (!std::isnan(want_recall))
        REQUIRE(std::abs(recall_value(got).value - want_recall) < 1e-12);
      double want_cba = oracle::cba_printed(want);
      if (!std::isnan(want_cba))
        REQUIRE(std::abs(cba_value(got, CbaVariant::printed).value - want_cba) < 1e-12);
      double want_std = oracle::cba_standard(want);
      if (!std::isnan(want_std))
        REQUIRE(std::abs(cba_value(got, CbaVariant::standard).value - want_std) < 1e-12);
    }
    auto want_pool = oracle::pooled(expected);
    REQUIRE(counts.pooled.tp == want_pool.tp);
    REQUIRE(counts.pooled.fp == want_pool.fp);
    double want_of1 = oracle::of1(want_pool);
    if (!std::isnan(want_of1))
      REQUIRE(std::abs(of1_value(counts.pooled).value - want_of1) < 1e-12);
    double want_oba = oracle::cba_printed(want_pool);
    if (!std::isnan(want_oba))
      REQUIRE(std::abs(oba_value(counts.pooled, CbaVariant::printed).value - want_oba) < 1e-12);
  }
}

TEST_CASE("turning a FN into a TP never lowers recall") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    ConfusionCell c;
    c.tp = long(rng.below(20));
    c.fn = 1 + long(rng.below(20));
    c.fp = long(rng.below(20));
    c.tn = long(rng.below(20));
    double before = recall_value(c).value;
    ConfusionCell after = c;
    after.tp += 1;
    after.fn -= 1;
    REQUIRE(recall_value(after).value >= before);
  }
}

TEST_CASE("metrics stay within the unit interval") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    ConfusionCell c{long(rng.below(30)), long(rng.below(30)),
                    long(rng.below(30)), long(rng.below(30))};
    for (auto v : {recall_value(c), cba_value(c, CbaVariant::printed),
                   cba_value(c, CbaVariant::standard), of1_value(c)}) {
      if (!v.defined) continue;
      REQUIRE(v.value >= 0.0);
      REQUIRE(v.value <= 1.0);
    }
  }
}

TEST_CASE("printed and standard balanced accuracy are both available") {
  ConfusionCell c{3, 1, 10, 4};
  double printed = 0.5 * (3.0 / 4.0 + 10.0 / 14.0);
  double standard = 0.5 * (3.0 / 7.0 + 10.0 / 11.0);
  REQUIRE(std::abs(cba_value(c, CbaVariant::printed).value - printed) < 1e-15);
  REQUIRE(std::abs(cba_value(c, CbaVariant::standard).value - standard) < 1e-15);
  REQUIRE(parse_cba_variant("printed") == CbaVariant::printed);
  REQUIRE_THROWS_AS(parse_cba_variant("weird"), ConfigError);
}

TEST_CASE("zero-denominator metrics are flagged undefined, not fatal") {
  // Class "ghost" never occurs in truth: TP+FN = 0 for it.
  LabeledDataset truth = toy::from_rows({{"A", "1"}, {"B", "2"}});
  truth.schema.push_back("ghost");
  PredictionSet p;
  p.by_id["m0"] = "A";
  p.by_id["m1"] = "B";
  auto sv = score_vector(truth, p);
  auto ghost_recall = sv.get({MetricKind::CR, "ghost"});
  REQUIRE_FALSE(ghost_recall.defined);
  REQUIRE(ghost_recall.value == 0.0);
  auto undef = sv.undefined_keys();
  REQUIRE_FALSE(undef.empty());
  REQUIRE(serialize_scores(sv).find("# undefined:") != std::string::npos);
}

TEST_CASE("delta percent follows the relative-change rule") {
  auto d = delta_of(0.5, 0.6);
  REQUIRE_FALSE(d.infinite);
  REQUIRE(std::abs(d.value - 20.0) < 1e-12);

  REQUIRE(delta_of(0.42, 0.42).value == 0.0);

  auto inf = delta_of(0.0, 0.158);
  REQUIRE(inf.infinite);

  auto still_zero = delta_of(0.0, 0.0);
  REQUIRE_FALSE(still_zero.infinite);
  REQUIRE(still_zero.value == 0.0);
}

TEST_CASE("delta vectors require matching schemas") {
  auto t1 = toy::from_rows({{"A", "1"}, {"B", "2"}});
  auto t2 = toy::from_rows({{"A", "1"}, {"C", "2"}});
  auto sv1 = score_vector(t1, preds_from(t1, {"A", "B"}));
  auto sv2 = score_vector(t2, preds_from(t2, {"A", "C"}));
  REQUIRE_THROWS(delta_percent(sv1, sv2));
  auto dv = delta_percent(sv1, sv1);
  for (size_t i = 0; i < dv.schema.size(); ++i) REQUIRE(dv.cr[i].value == 0.0);
}

TEST_CASE("score vectors serialize and parse losslessly") {
  auto truth = toy::from_rows({{"A", "1"}, {"A", "2"}, {"B", "3"}});
  auto sv = score_vector(truth, preds_from(truth, {"A", "B", "B"}));
  auto back = parse_scores(serialize_scores(sv));
  REQUIRE(back.schema == sv.schema);
  for (const auto& id : sv.ids())
    REQUIRE(back.get(id).value == sv.get(id).value);
}

TEST_CASE("metric ids parse and print") {
  auto id = parse_metric_id("CR:T7");
  REQUIRE(id.kind == MetricKind::CR);
  REQUIRE(id.cls == "T7");
  REQUIRE(id.key() == "CR:T7");
  REQUIRE(parse_metric_id("OBA").overall());
  REQUIRE_THROWS_AS(parse_metric_id("CR"), ParseError);
  REQUIRE_THROWS_AS(parse_metric_id("OBA:T1"), ParseError);
  REQUIRE_THROWS_AS(parse_metric_id("XYZ"), ParseError);
}
