#pragma once
// Text embedding into a fixed n-D unit cube and 2D projections of it.
// Pipeline: character-3-gram + word-unigram hashing into buckets, TF-IDF
// weighting with IDF fit on the train partition, a seeded sign-random
// projection down to n dims, then per-dimension min-max normalization
// using train statistics. Everything downstream treats the result as an
// opaque point in [0,1]^n.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "autogets/common.hpp"
#include "autogets/corpus.hpp"
#include "autogets/metrics.hpp"
#include "autogets/tsv.hpp"

namespace autogets {

struct EmbeddingConfig {
  int dims = 20;
  int buckets = 4096;
  uint64_t hash_seed = 1;
};

using FeatureVector = std::vector<double>;
using EmbeddingTable = std::unordered_map<std::string, FeatureVector>;

class Embedder {
 public:
  static Embedder fit(const LabeledDataset& train, const EmbeddingConfig& cfg) {
    if (cfg.dims < 2) throw ConfigError("embedding dims must be >= 2");
    if (cfg.buckets < 1) throw ConfigError("embedding buckets must be >= 1");
    Embedder e;
    e.cfg_ = cfg;

    std::vector<long> df(static_cast<size_t>(cfg.buckets), 0);
    std::vector<std::vector<std::pair<int, double>>> train_counts;
    train_counts.reserve(train.size());
    for (const auto& m : train.messages) {
      auto counts = e.bucket_counts(m.text);
      for (const auto& [b, tf] : counts) ++df[static_cast<size_t>(b)];
      train_counts.push_back(std::move(counts));
    }
    double n_docs = static_cast<double>(train.size());
    e.idf_.resize(static_cast<size_t>(cfg.buckets));
    for (int b = 0; b < cfg.buckets; ++b)
      e.idf_[static_cast<size_t>(b)] =
          std::log((1.0 + n_docs) / (1.0 + static_cast<double>(df[static_cast<size_t>(b)]))) + 1.0;

    // Projection of raw train vectors fixes the per-dimension ranges.
    e.dim_min_.assign(static_cast<size_t>(cfg.dims), 0.0);
    e.dim_max_.assign(static_cast<size_t>(cfg.dims), 0.0);
    std::vector<FeatureVector> raw;
    raw.reserve(train.size());
    for (const auto& counts : train_counts) raw.push_back(e.project(counts));
    for (size_t i = 0; i < raw.size(); ++i) {
      for (int d = 0; d < cfg.dims; ++d) {
        double v = raw[i][static_cast<size_t>(d)];
        if (i == 0 || v < e.dim_min_[static_cast<size_t>(d)]) e.dim_min_[static_cast<size_t>(d)] = v;
        if (i == 0 || v > e.dim_max_[static_cast<size_t>(d)]) e.dim_max_[static_cast<size_t>(d)] = v;
      }
    }

    // Variance of the normalized train embedding drives projection ranking.
    e.train_variance_.assign(static_cast<size_t>(cfg.dims), 0.0);
    if (!raw.empty()) {
      std::vector<double> mean(static_cast<size_t>(cfg.dims), 0.0);
      std::vector<FeatureVector> norm;
      norm.reserve(raw.size());
      for (const auto& v : raw) {
        norm.push_back(e.normalize(v));
        for (int d = 0; d < cfg.dims; ++d) mean[static_cast<size_t>(d)] += norm.back()[static_cast<size_t>(d)];
      }
      for (auto& v : mean) v /= static_cast<double>(norm.size());
      for (const auto& v : norm)
        for (int d = 0; d < cfg.dims; ++d) {
          double diff = v[static_cast<size_t>(d)] - mean[static_cast<size_t>(d)];
          e.train_variance_[static_cast<size_t>(d)] += diff * diff;
        }
      for (auto& v : e.train_variance_) v /= static_cast<double>(norm.size());
    }

    uint64_t h = kFnvOffset;
    h = fnv1a_u64(static_cast<uint64_t>(cfg.dims), h);
    h = fnv1a_u64(static_cast<uint64_t>(cfg.buckets), h);
    h = fnv1a_u64(cfg.hash_seed, h);
    for (double v : e.dim_min_) h = fnv1a(fmt_double(v), h);
    for (double v : e.dim_max_) h = fnv1a(fmt_double(v), h);
    e.fingerprint_ = h;
    return e;
  }

  int dims() const { return cfg_.dims; }
  uint64_t fingerprint() const { return fingerprint_; }
  const std::vector<double>& train_variance() const { return train_variance_; }

  FeatureVector embed(const std::string& text) const {
    return normalize(project(bucket_counts(text)));
  }

  EmbeddingTable embed_all(const LabeledDataset& ds) const {
    EmbeddingTable out;
    out.reserve(ds.size());
    for (const auto& m : ds.messages) out.emplace(m.id, embed(m.text));
    return out;
  }

 private:
  // Sparse bucket -> term frequency for one text.
  std::vector<std::pair<int, double>> bucket_counts(const std::string& text) const {
    std::unordered_map<int, double> tf;
    std::string lower = to_lower(text);
    for (const auto& word : split_ws(lower))
      tf[bucket_of(fnv1a(word, fnv1a("w\x1f")))] += 1.0;
    if (lower.size() >= 3)
      for (size_t i = 0; i + 3 <= lower.size(); ++i)
        tf[bucket_of(fnv1a(std::string_view(lower).substr(i, 3), fnv1a("c\x1f")))] += 1.0;
    std::vector<std::pair<int, double>> out(tf.begin(), tf.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  int bucket_of(uint64_t term_hash) const {
    return static_cast<int>(mix64(term_hash ^ cfg_.hash_seed) %
                            static_cast<uint64_t>(cfg_.buckets));
  }

  // Lazily materialized sign-random matrix entry for (bucket, dim).
  double sign_of(int bucket, int dim) const {
    uint64_t cell = static_cast<uint64_t>(bucket) *
                        static_cast<uint64_t>(cfg_.dims) +
                    static_cast<uint64_t>(dim);
    return (mix64(cell ^ mix64(cfg_.hash_seed)) & 1u) ? 1.0 : -1.0;
  }

  FeatureVector project(const std::vector<std::pair<int, double>>& counts) const {
    FeatureVector v(static_cast<size_t>(cfg_.dims), 0.0);
    for (const auto& [b, tf] : counts) {
      double w = tf * idf_[static_cast<size_t>(b)];
      for (int d = 0; d < cfg_.dims; ++d)
        v[static_cast<size_t>(d)] += w * sign_of(b, d);
    }
    return v;
  }

  FeatureVector normalize(const FeatureVector& raw) const {
    FeatureVector v(raw.size());
    for (size_t d = 0; d < raw.size(); ++d) {
      double lo = dim_min_[d], hi = dim_max_[d];
      if (hi <= lo) {
        v[d] = 0.5;
      } else {
        v[d] = std::clamp((raw[d] - lo) / (hi - lo), 0.0, 1.0);
      }
    }
    return v;
  }

  EmbeddingConfig cfg_;
  std::vector<double> idf_;
  std::vector<double> dim_min_, dim_max_;
  std::vector<double> train_variance_;
  uint64_t fingerprint_ = 0;
};

struct Projection {
  int dim_a = 0;
  int dim_b = 1;

  friend bool operator==(const Projection& a, const Projection& b) {
    return a.dim_a == b.dim_a && a.dim_b == b.dim_b;
  }
};

enum class ProjectionMode { all_pairs, consecutive, top_variance };

inline ProjectionMode parse_projection_mode(const std::string& s) {
  if (s == "all_pairs") return ProjectionMode::all_pairs;
  if (s == "consecutive") return ProjectionMode::consecutive;
  if (s == "top_variance") return ProjectionMode::top_variance;
  throw ConfigError("unknown projection mode '" + s + "'");
}

// top_variance ranks dimension pairs by the product of per-dimension
// variances (descending), breaking ties lexicographically, and keeps k.
inline std::vector<Projection> enumerate_projections(
    int n, ProjectionMode mode, int k = 0,
    const std::vector<double>& variance = {}) {
  if (n < 2) throw ConfigError("projection space needs n >= 2 dimensions");
  std::vector<Projection> out;
  switch (mode) {
    case ProjectionMode::all_pairs:
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) out.push_back({a, b});
      return out;
    case ProjectionMode::consecutive:
      for (int a = 0; a + 1 < n; ++a) out.push_back({a, a + 1});
      return out;
    case ProjectionMode::top_variance: {
      long all = static_cast<long>(n) * (n - 1) / 2;
      if (k < 1) throw ConfigError("top_variance requires k >= 1");
      if (k > all)
        throw ConfigError("top_variance k=" + std::to_string(k) +
                          " exceeds the " + std::to_string(all) +
                          " available projections");
      if (static_cast<int>(variance.size()) != n)
        throw ConfigError("top_variance requires per-dimension variances");
      std::vector<Projection> pairs;
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) pairs.push_back({a, b});
      std::stable_sort(pairs.begin(), pairs.end(),
                       [&](const Projection& p, const Projection& q) {
                         double vp = variance[size_t(p.dim_a)] * variance[size_t(p.dim_b)];
                         double vq = variance[size_t(q.dim_a)] * variance[size_t(q.dim_b)];
                         return vp > vq;  // stable sort keeps lexicographic ties
                       });
      pairs.resize(static_cast<size_t>(k));
      return pairs;
    }
  }
  throw std::logic_error("bad projection mode");
}

enum class PointColor { TrainTarget, TestCorrect, TestIncorrect, Other };

inline const char* point_color_name(PointColor c) {
  switch (c) {
    case PointColor::TrainTarget: return "train_target";
    case PointColor::TestCorrect: return "test_correct";
    case PointColor::TestIncorrect: return "test_incorrect";
    case PointColor::Other: return "other";
  }
  return "?";
}

struct ProjectedPoint {
  std::string message_id;
  double x = 0.0;
  double y = 0.0;
  PointColor color = PointColor::Other;
};

// Train and opt_test points of one split, colored relative to a target
// class and the model's opt_test predictions.
inline std::vector<ProjectedPoint> color_points(const Split& split,
                                                const ClassId& target,
                                                const PredictionSet& predictions,
                                                const Projection& proj,
                                                const EmbeddingTable& table) {
  auto coord = [&](const std::string& id) -> std::pair<double, double> {
    auto it = table.find(id);
    if (it == table.end())
      throw std::runtime_error("no embedding for message '" + id + "'");
    return {it->second[static_cast<size_t>(proj.dim_a)],
            it->second[static_cast<size_t>(proj.dim_b)]};
  };
  std::vector<ProjectedPoint> out;
  for (const auto& m : split.train.messages) {
    auto [x, y] = coord(m.id);
    out.push_back({m.id, x, y,
                   m.label == target ? PointColor::TrainTarget : PointColor::Other});
  }
  for (const auto& m : split.opt_test.messages) {
    auto it = predictions.by_id.find(m.id);
    if (it == predictions.by_id.end())
      throw std::runtime_error("no prediction for opt_test message '" + m.id + "'");
    auto [x, y] = coord(m.id);
    PointColor color = PointColor::Other;
    if (m.label == target)
      color = (it->second == target) ? PointColor::TestCorrect
                                     : PointColor::TestIncorrect;
    out.push_back({m.id, x, y, color});
  }
  return out;
}

inline std::string serialize_points(const std::vector<ProjectedPoint>& points) {
  std::string out = "message_id\tx\ty\tcolor\n";
  for (const auto& p : points)
    out += tsv_line({p.message_id, fmt_double(p.x), fmt_double(p.y),
                     point_color_name(p.color)});
  return out;
}

}  // namespace autogets
