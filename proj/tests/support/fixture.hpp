#pragma once
// Shared end-to-end fixture: a toy corpus split, fitted embedder,
// baseline model, and a SearchContext wired to a mock backend.

#include <set>
#include <string>
#include <vector>

#include "autogets/search.hpp"
#include "support/toy.hpp"

namespace testsupport {

using namespace autogets;

// Owns everything a SearchContext points at; non-copyable so the pointers
// wired into ctx stay valid for the fixture's lifetime.
struct SearchFixture {
  Split split;
  Embedder embedder;
  EmbeddingTable table;
  TrainedModel baseline;
  ScoreVector baseline_scores;
  MockGenerator mock;
  SearchContext ctx;

  explicit SearchFixture(const LabeledDataset& ds, uint64_t seed = 101,
                         int epochs = 60) {
    split = stratified_split(ds, {}, seed);
    EmbeddingConfig cfg;
    embedder = Embedder::fit(split.train, cfg);
    table = embedder.embed_all(split.train);
    for (auto& [id, vec] : embedder.embed_all(split.opt_test))
      table.emplace(id, vec);

    ctx.model_spec.hyper["epochs"] = std::to_string(epochs);
    baseline = train(ctx.model_spec, embedder, split.train);
    auto preds = predict(baseline, embedder, split.opt_test);
    baseline_scores = score_vector(split.opt_test, preds);

    ctx.split = &split;
    ctx.backend = &mock;
    ctx.embedder = &embedder;
    ctx.embeddings = &table;
    ctx.projections = {{0, 1}, {2, 3}};
    ctx.baseline_model = baseline;
    ctx.baseline_scores = baseline_scores;
    ctx.gen.per_example = 2;
    ctx.gen.cap = 10;
  }

  SearchFixture(const SearchFixture&) = delete;
  SearchFixture& operator=(const SearchFixture&) = delete;
};

struct ThrowingGenerator : Generator {
  std::string id() const override { return "throwing"; }
  std::vector<std::string> produce(const ClassId&,
                                   const std::vector<std::string>&, long,
                                   uint64_t, std::vector<std::string>&) override {
    throw std::runtime_error("backend unavailable");
  }
};

inline bool same_attempts(const std::vector<AttemptRecord>& a,
                          const std::vector<AttemptRecord>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].attempt_index != b[i].attempt_index) return false;
    if (a[i].example_set.message_ids != b[i].example_set.message_ids) return false;
    if (a[i].batch_id != b[i].batch_id) return false;
    if (a[i].failed != b[i].failed) return false;
    if (!a[i].failed && a[i].objective_value != b[i].objective_value) return false;
    if (a[i].chromosome != b[i].chromosome) return false;
  }
  return true;
}

}  // namespace testsupport
