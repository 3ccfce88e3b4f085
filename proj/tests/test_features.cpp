#include <catch2/catch_amalgamated.hpp>

#include "autogets/features.hpp"
#include "support/toy.hpp"

using namespace autogets;

TEST_CASE("identical texts embed identically and dims are respected") {
  auto ds = toy::from_rows({{"A", "same words here"},
                            {"B", "same words here"},
                            {"B", "totally different content"}});
  EmbeddingConfig cfg;
  cfg.dims = 20;
  auto emb = Embedder::fit(ds, cfg);
  auto table = emb.embed_all(ds);
  REQUIRE(table.at("m0") == table.at("m1"));
  REQUIRE(table.at("m0") != table.at("m2"));
  for (const auto& [id, vec] : table) {
    REQUIRE(vec.size() == 20);
    for (double v : vec) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("single-message corpus maps to the degenerate midpoint") {
  LabeledDataset ds = toy::from_rows({{"A", "only one message"}});
  auto emb = Embedder::fit(ds, {});
  auto vec = emb.embed("only one message");
  for (double v : vec) REQUIRE(v == 0.5);
}

TEST_CASE("embedding is deterministic and config-sensitive") {
  auto ds = toy::separable(2, 8);
  EmbeddingConfig cfg;
  cfg.hash_seed = 99;
  auto e1 = Embedder::fit(ds, cfg);
  auto e2 = Embedder::fit(ds, cfg);
  REQUIRE(e1.fingerprint() == e2.fingerprint());
  REQUIRE(e1.embed("probe text") == e2.embed("probe text"));
  cfg.hash_seed = 100;
  auto e3 = Embedder::fit(ds, cfg);
  REQUIRE(e3.fingerprint() != e1.fingerprint());
}

TEST_CASE("dims below 2 are rejected") {
  auto ds = toy::separable(2, 3);
  EmbeddingConfig cfg;
  cfg.dims = 1;
  REQUIRE_THROWS_AS(Embedder::fit(ds, cfg), ConfigError);
}

TEST_CASE("all_pairs projection count is n choose 2") {
  REQUIRE(enumerate_projections(20, ProjectionMode::all_pairs).size() == 190);
  auto ps = enumerate_projections(4, ProjectionMode::all_pairs);
  REQUIRE(ps.front() == Projection{0, 1});
  REQUIRE(ps.back() == Projection{2, 3});
  for (const auto& p : ps) REQUIRE(p.dim_a < p.dim_b);
}

TEST_CASE("consecutive mode pairs neighboring dimensions") {
  auto ps = enumerate_projections(3, ProjectionMode::consecutive);
  REQUIRE(ps == std::vector<Projection>{{0, 1}, {1, 2}});
}

TEST_CASE("top_variance ranks by variance product") {
  // All 6 pair products of [0.4,0.3,0.2,0.1]: (0,1)=.12 (0,2)=.08 (0,3)=.04
  // (1,2)=.06 (1,3)=.03 (2,3)=.02 -> top 2 = (0,1), (0,2).
  std::vector<double> variance = {0.4, 0.3, 0.2, 0.1};
  auto ps = enumerate_projections(4, ProjectionMode::top_variance, 2, variance);
  REQUIRE(ps == std::vector<Projection>{{0, 1}, {0, 2}});
}

TEST_CASE("top_variance breaks ties lexicographically") {
  std::vector<double> variance = {0.2, 0.2, 0.2};
  auto ps = enumerate_projections(3, ProjectionMode::top_variance, 3, variance);
  REQUIRE(ps == std::vector<Projection>{{0, 1}, {0, 2}, {1, 2}});
}

TEST_CASE("top_variance k beyond the pair count is an error") {
  std::vector<double> variance = {0.1, 0.2, 0.3};
  REQUIRE_THROWS_AS(enumerate_projections(3, ProjectionMode::top_variance, 4, variance),
                    ConfigError);
}

TEST_CASE("point coloring follows the four-way rule") {
  auto ds = toy::separable(2, 6, 21);
  auto split = stratified_split(ds, {0.6, 0.2, 0.2}, 3);
  auto emb = Embedder::fit(split.train, {});
  EmbeddingTable table = emb.embed_all(split.train);
  for (const auto& [id, v] : emb.embed_all(split.opt_test)) table[id] = v;

  ClassId target = "c00";
  PredictionSet preds;
  bool first_target = true;
  for (const auto& m : split.opt_test.messages) {
    if (m.label == target && first_target) {
      preds.by_id[m.id] = "c01";  // one forced mistake
      first_target = false;
    } else {
      preds.by_id[m.id] = m.label;
    }
  }

  auto points = color_points(split, target, preds, {0, 1}, table);
  REQUIRE(points.size() == split.train.size() + split.opt_test.size());

  size_t train_target = 0, correct = 0, incorrect = 0, other = 0;
  for (const auto& p : points) {
    REQUIRE(p.x >= 0.0);
    REQUIRE(p.x <= 1.0);
    REQUIRE(p.y >= 0.0);
    REQUIRE(p.y <= 1.0);
    switch (p.color) {
      case PointColor::TrainTarget: ++train_target; break;
      case PointColor::TestCorrect: ++correct; break;
      case PointColor::TestIncorrect: ++incorrect; break;
      case PointColor::Other: ++other; break;
    }
  }
  REQUIRE(train_target == split.train.class_sizes().at(target));
  REQUIRE(incorrect == 1);
  REQUIRE(correct == split.opt_test.class_sizes().at(target) - 1);
  REQUIRE(other == points.size() - train_target - correct - incorrect);

  // The TrainTarget points are exactly the target-class train messages.
  std::set<std::string> expected;
  for (const auto& m : split.train.messages)
    if (m.label == target) expected.insert(m.id);
  std::set<std::string> got;
  for (const auto& p : points)
    if (p.color == PointColor::TrainTarget) got.insert(p.message_id);
  REQUIRE(got == expected);
}

TEST_CASE("a missing opt_test prediction is an error") {
  auto ds = toy::separable(2, 6, 22);
  auto split = stratified_split(ds, {0.6, 0.2, 0.2}, 4);
  auto emb = Embedder::fit(split.train, {});
  EmbeddingTable table = emb.embed_all(split.train);
  for (const auto& [id, v] : emb.embed_all(split.opt_test)) table[id] = v;
  PredictionSet empty;
  REQUIRE_THROWS_WITH(color_points(split, "c00", empty, {0, 1}, table),
                      Catch::Matchers::ContainsSubstring("no prediction"));
}

TEST_CASE("projected points serialize as a TSV table") {
  std::vector<ProjectedPoint> pts = {{"m1", 0.25, 0.5, PointColor::TestCorrect}};
  auto text = serialize_points(pts);
  REQUIRE(text.find("message_id\tx\ty\tcolor") == 0);
  REQUIRE(text.find("m1\t0.25\t0.5\ttest_correct") != std::string::npos);
}
