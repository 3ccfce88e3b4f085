#pragma once
// Example-subset search. Three strategies propose example sets (sliding
// window, hierarchical sliding window, genetic algorithm); every attempt
// generates a synthetic batch from the chosen examples, retrains on
// train ∪ batch, scores on the optimization split, and the run keeps the
// arg max over {baseline, attempts}. Attempts inside one wave evaluate in
// parallel; waves fold back sequentially in attempt order, so parallelism
// never changes the outcome.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "autogets/classifier.hpp"
#include "autogets/common.hpp"
#include "autogets/corpus.hpp"
#include "autogets/features.hpp"
#include "autogets/metrics.hpp"
#include "autogets/synthgen.hpp"

namespace autogets {

enum class Strategy { SW, HSW, GA };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::SW: return "SW";
    case Strategy::HSW: return "HSW";
    case Strategy::GA: return "GA";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "SW") return Strategy::SW;
  if (s == "HSW") return Strategy::HSW;
  if (s == "GA") return Strategy::GA;
  throw ConfigError("unknown strategy '" + s + "'");
}

struct Window {
  Projection proj;
  double x0 = 0, y0 = 0, x1 = 1, y1 = 1;
  int depth = 0;

  bool contains(double x, double y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
  bool encloses(const Window& w) const {
    return w.x0 >= x0 && w.x1 <= x1 && w.y0 >= y0 && w.y1 <= y1;
  }
};

// Origins i*stride with the window still inside [0,1].
inline std::vector<double> window_origins(double window_size, double stride) {
  std::vector<double> out;
  for (int i = 0;; ++i) {
    double pos = stride * i;
    if (pos + window_size > 1.0 + 1e-9) break;
    out.push_back(pos);
  }
  return out;
}

// Row-major scan: y advances in the outer loop.
inline std::vector<Window> enumerate_windows(const Projection& proj,
                                             double window_size, double stride,
                                             int depth = 0) {
  std::vector<Window> out;
  auto origins = window_origins(window_size, stride);
  for (double y : origins)
    for (double x : origins)
      out.push_back({proj, x, y, x + window_size, y + window_size, depth});
  return out;
}

// 2x2 half-size children, row-major.
inline std::array<Window, 4> subdivide(const Window& w) {
  double xm = 0.5 * (w.x0 + w.x1);
  double ym = 0.5 * (w.y0 + w.y1);
  int d = w.depth + 1;
  return {Window{w.proj, w.x0, w.y0, xm, ym, d},
          Window{w.proj, xm, w.y0, w.x1, ym, d},
          Window{w.proj, w.x0, ym, xm, w.y1, d},
          Window{w.proj, xm, ym, w.x1, w.y1, d}};
}

struct SwParams {
  double window_size = 0.25;
  double stride = 0.125;
  int k = 8;
  int attempts_per_window = 3;

  void validate() const {
    if (window_size <= 0 || window_size > 1)
      throw ConfigError("window_size must be in (0,1]");
    if (stride <= 0 || stride > window_size)
      throw ConfigError("stride must be in (0,window_size]");
    if (k < 1) throw ConfigError("k must be >= 1");
    if (attempts_per_window < 1)
      throw ConfigError("attempts_per_window must be >= 1");
  }
};

struct HswParams {
  double window_size = 0.5;
  double stride = 0.25;
  int k = 8;
  int attempts_per_window = 3;
  int max_depth = 2;
  // Decides subdivision after a window's attempts complete; the default
  // subdivides iff some attempt strictly improved the incumbent.
  std::function<bool(const Window&, bool improved_any)> promising;

  void validate() const {
    SwParams proxy{window_size, stride, k, attempts_per_window};
    proxy.validate();
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  }
};

struct GaParams {
  int population = 20;
  int k_max = 16;
  double crossover_rate = 0.9;
  std::optional<double> mutation_rate;  // default 1/m genes
  int tournament = 3;
  int repair_retries = 64;

  void validate() const {
    if (population < 2) throw ConfigError("GA population must be >= 2");
    if (k_max < 1) throw ConfigError("GA k_max must be >= 1");
    if (crossover_rate < 0 || crossover_rate > 1)
      throw ConfigError("GA crossover_rate must be in [0,1]");
    if (mutation_rate && (*mutation_rate < 0 || *mutation_rate > 1))
      throw ConfigError("GA mutation_rate must be in [0,1]");
    if (tournament < 1) throw ConfigError("GA tournament size must be >= 1");
  }
};

struct Budget {
  long max_attempts = 1;
  std::optional<double> wall_clock_limit_s;

  void validate() const {
    if (max_attempts < 1) throw ConfigError("budget must allow >= 1 attempt");
    if (wall_clock_limit_s && *wall_clock_limit_s <= 0)
      throw ConfigError("wall clock limit must be positive");
  }
};

// Synthetic volume per attempt: per_example texts per chosen example,
// capped per attempt.
struct GenVolume {
  long per_example = 10;
  long cap = 200;

  long count_for(size_t n_examples) const {
    long raw = per_example * static_cast<long>(n_examples);
    return std::max(1L, std::min(raw, cap));
  }
};

struct Setting {
  Strategy strategy = Strategy::SW;
  MetricKind metric = MetricKind::CR;
  ClassId example_class;

  MetricId objective() const {
    if (metric_kind_is_overall(metric)) return {metric, {}};
    return {metric, example_class};
  }

  std::string key() const {
    return std::string(strategy_name(strategy)) + "|" + metric_kind_name(metric) +
           "|" + example_class;
  }
};

inline Setting parse_setting_key(const std::string& key) {
  auto parts = split_char(key, '|');
  if (parts.size() != 3) throw ParseError("bad setting key '" + key + "'");
  return {parse_strategy(parts[0]), parse_metric_kind(parts[1]), parts[2]};
}

struct Candidate {
  ExampleSet examples;
  std::optional<Window> window;
  std::string chromosome;  // "0"/"1" per gene; empty for non-GA
};

struct AttemptRecord {
  long attempt_index = 0;
  std::string strategy;
  ExampleSet example_set;
  std::string batch_id;
  ScoreVector scores;
  double objective_value = 0.0;
  std::optional<Window> window;
  std::string chromosome;
  bool failed = false;
  std::string failure;
};

struct OptimizationResult {
  TrainedModel best_model;
  double best_value = 0.0;
  double baseline_value = 0.0;
  ScoreVector best_scores;
  ScoreVector baseline_scores;
  std::vector<AttemptRecord> attempts;
  std::optional<SyntheticBatch> winning_batch;  // none iff best is baseline
  long best_attempt_index = -1;                 // -1 iff best is baseline
  std::vector<std::string> warnings;
};

struct SearchContext {
  const Split* split = nullptr;
  ModelSpec model_spec;
  Generator* backend = nullptr;
  const Embedder* embedder = nullptr;
  const EmbeddingTable* embeddings = nullptr;  // train + opt_test
  std::vector<Projection> projections;
  SwParams sw;
  HswParams hsw;
  GaParams ga;
  GenVolume gen;
  CbaVariant cba = CbaVariant::printed;
  TrainedModel baseline_model;
  ScoreVector baseline_scores;
  int jobs = 1;
};

namespace detail {

struct TargetPoint {
  std::string id;
  const FeatureVector* vec;
};

inline std::vector<TargetPoint> target_points(const SearchContext& ctx,
                                              const ClassId& cls) {
  std::vector<TargetPoint> out;
  for (const auto& m : ctx.split->train.messages) {
    if (m.label != cls) continue;
    auto it = ctx.embeddings->find(m.id);
    if (it == ctx.embeddings->end())
      throw std::runtime_error("no embedding for train message '" + m.id + "'");
    out.push_back({m.id, &it->second});
  }
  return out;
}

class Selector {
 public:
  virtual ~Selector() = default;
  // Next batch of candidates whose evaluations are mutually independent.
  // Empty means the strategy is exhausted.
  virtual std::vector<Candidate> next_wave() = 0;
  virtual void feedback(const Candidate&, double objective_value, bool improved) {}

  std::vector<std::string> warnings;
};

inline std::vector<std::string> ids_in_window(const std::vector<TargetPoint>& points,
                                              const Window& w) {
  std::vector<std::string> out;
  for (const auto& p : points) {
    double x = (*p.vec)[static_cast<size_t>(w.proj.dim_a)];
    double y = (*p.vec)[static_cast<size_t>(w.proj.dim_b)];
    if (w.contains(x, y)) out.push_back(p.id);
  }
  return out;
}

inline ExampleSet sample_examples(const ClassId& cls,
                                  const std::vector<std::string>& pool, int k,
                                  Rng& rng) {
  ExampleSet ex;
  ex.cls = cls;
  size_t take = std::min(static_cast<size_t>(k), pool.size());
  for (size_t idx : rng.sample_indices(pool.size(), take))
    ex.message_ids.push_back(pool[idx]);
  ex.canonicalize();
  return ex;
}

// Window scan shared by SW (fixed queue) and HSW (growing queue). One wave
// = all attempts of the next non-empty window.
class WindowSelector : public Selector {
 public:
  WindowSelector(const SearchContext& ctx, const ClassId& cls, int k,
                 int attempts_per_window, uint64_t seed)
      : points_(target_points(ctx, cls)),
        cls_(cls),
        k_(k),
        attempts_per_window_(attempts_per_window),
        rng_(seed) {}

  std::vector<Candidate> next_wave() override {
    while (true) {
      auto w = pop_window();
      if (!w) return {};
      auto pool = ids_in_window(points_, *w);
      if (pool.empty()) continue;  // skipped without consuming budget
      std::vector<Candidate> wave;
      for (int a = 0; a < attempts_per_window_; ++a) {
        Candidate c;
        c.examples = sample_examples(cls_, pool, k_, rng_);
        c.window = *w;
        wave.push_back(std::move(c));
      }
      on_wave(*w, wave.size());
      return wave;
    }
  }

 protected:
  virtual std::optional<Window> pop_window() = 0;
  virtual void on_wave(const Window&, size_t) {}

  std::vector<TargetPoint> points_;
  ClassId cls_;
  int k_;
  int attempts_per_window_;
  Rng rng_;
};

class SwSelector : public WindowSelector {
 public:
  SwSelector(const SearchContext& ctx, const ClassId& cls, uint64_t seed)
      : WindowSelector(ctx, cls, ctx.sw.k, ctx.sw.attempts_per_window, seed) {
    ctx.sw.validate();
    // Window-outer, projection-inner: small budgets still touch several
    // projections of the same region before moving on.
    auto origins = window_origins(ctx.sw.window_size, ctx.sw.stride);
    for (double y : origins)
      for (double x : origins)
        for (const auto& proj : ctx.projections)
          queue_.push_back({proj, x, y, x + ctx.sw.window_size,
                            y + ctx.sw.window_size, 0});
  }

 protected:
  std::optional<Window> pop_window() override {
    if (queue_.empty()) return std::nullopt;
    Window w = queue_.front();
    queue_.pop_front();
    return w;
  }

 private:
  std::deque<Window> queue_;
};

class HswSelector : public WindowSelector {
 public:
  HswSelector(const SearchContext& ctx, const ClassId& cls, uint64_t seed)
      : WindowSelector(ctx, cls, ctx.hsw.k, ctx.hsw.attempts_per_window, seed),
        max_depth_(ctx.hsw.max_depth),
        promising_(ctx.hsw.promising) {
    ctx.hsw.validate();
    auto origins = window_origins(ctx.hsw.window_size, ctx.hsw.stride);
    for (double y : origins)
      for (double x : origins)
        for (const auto& proj : ctx.projections)
          queue_.push_back({proj, x, y, x + ctx.hsw.window_size,
                            y + ctx.hsw.window_size, 0});
  }

  void feedback(const Candidate& c, double, bool improved) override {
    if (!pending_ || !c.window) return;
    improved_any_ |= improved;
    if (--pending_ > 0) return;
    bool subdivide_now = promising_ ? promising_(current_, improved_any_)
                                    : improved_any_;
    if (subdivide_now && current_.depth < max_depth_)
      for (const auto& child : subdivide(current_)) queue_.push_back(child);
  }

 protected:
  std::optional<Window> pop_window() override {
    if (queue_.empty()) return std::nullopt;
    Window w = queue_.front();
    queue_.pop_front();
    return w;
  }

  void on_wave(const Window& w, size_t emitted) override {
    current_ = w;
    pending_ = emitted;
    improved_any_ = false;
  }

 private:
  std::deque<Window> queue_;
  int max_depth_;
  std::function<bool(const Window&, bool)> promising_;
  Window current_;
  size_t pending_ = 0;
  bool improved_any_ = false;
};

class GaSelector : public Selector {
 public:
  GaSelector(const SearchContext& ctx, const ClassId& cls, uint64_t seed)
      : params_(ctx.ga), cls_(cls), rng_(seed) {
    params_.validate();
    for (const auto& p : target_points(ctx, cls)) genes_.push_back(p.id);
    m_ = genes_.size();
    mutation_rate_ = params_.mutation_rate
                         ? *params_.mutation_rate
                         : 1.0 / static_cast<double>(std::max<size_t>(m_, 1));
  }

  std::vector<Candidate> next_wave() override {
    if (exhausted_()) {
      warn_exhausted();
      return {};
    }
    std::vector<std::vector<bool>> chroms =
        population_.empty() ? initial_population() : breed();
    if (chroms.empty()) {
      if (exhausted_())
        warn_exhausted();
      else
        warnings.push_back(
            "GA early stop: no novel chromosome found within the repair "
            "budget");
      return {};
    }
    pending_.clear();
    std::vector<Candidate> wave;
    for (auto& ch : chroms) {
      Candidate c;
      c.chromosome = to_string_bits(ch);
      c.examples.cls = cls_;
      for (size_t g = 0; g < m_; ++g)
        if (ch[g]) c.examples.message_ids.push_back(genes_[g]);
      c.examples.canonicalize();
      pending_.push_back({std::move(ch), 0.0, false});
      wave.push_back(std::move(c));
    }
    return wave;
  }

  void feedback(const Candidate& c, double value, bool) override {
    for (auto& p : pending_) {
      if (p.scored || to_string_bits(p.chrom) != c.chromosome) continue;
      p.fitness = value;
      p.scored = true;
      break;
    }
    bool all = true;
    for (const auto& p : pending_) all = all && p.scored;
    if (!all) return;
    // Fold the evaluated wave into the population, padding with the best
    // survivors so the next generation always has `population` parents.
    std::vector<Individual> next;
    for (auto& p : pending_) next.push_back({p.chrom, p.fitness});
    std::stable_sort(population_.begin(), population_.end(),
                     [](const Individual& a, const Individual& b) {
                       return a.fitness > b.fitness;
                     });
    for (const auto& ind : population_) {
      if (next.size() >= static_cast<size_t>(params_.population)) break;
      next.push_back(ind);
    }
    population_ = std::move(next);
    pending_.clear();
  }

 private:
  struct Individual {
    std::vector<bool> chrom;
    double fitness = 0.0;
  };
  struct Pending {
    std::vector<bool> chrom;
    double fitness;
    bool scored;
  };

  static std::string to_string_bits(const std::vector<bool>& ch) {
    std::string s(ch.size(), '0');
    for (size_t i = 0; i < ch.size(); ++i)
      if (ch[i]) s[i] = '1';
    return s;
  }

  bool exhausted_() const {
    if (m_ == 0) return true;
    if (m_ <= 20 && tested_.size() >= (size_t(1) << m_) - 1) return true;
    return false;
  }

  void warn_exhausted() {
    if (warned_exhausted_ || m_ == 0 || m_ > 20) return;
    warned_exhausted_ = true;
    warnings.push_back("GA early stop: all " +
                       std::to_string((size_t(1) << m_) - 1) +
                       " non-empty example subsets already evaluated");
  }

  bool claim(const std::vector<bool>& ch) {
    return tested_.insert(to_string_bits(ch)).second;
  }

  std::vector<bool> random_chromosome() {
    size_t cap = std::min<size_t>(static_cast<size_t>(params_.k_max), m_);
    size_t s = 1 + rng_.below(cap);
    std::vector<bool> ch(m_, false);
    for (size_t idx : rng_.sample_indices(m_, s)) ch[idx] = true;
    return ch;
  }

  // Flip random genes looking for an untested variant; popcount stays >= 1.
  bool make_novel(std::vector<bool>& ch) {
    for (int tries = 0; tries < params_.repair_retries; ++tries) {
      if (claim(ch)) return true;
      size_t g = rng_.index(m_);
      ch[g] = !ch[g];
      if (popcount(ch) == 0) ch[rng_.index(m_)] = true;
    }
    return claim(ch);
  }

  static size_t popcount(const std::vector<bool>& ch) {
    size_t n = 0;
    for (bool b : ch) n += b ? 1 : 0;
    return n;
  }

  std::vector<std::vector<bool>> initial_population() {
    std::vector<std::vector<bool>> out;
    for (int i = 0; i < params_.population; ++i) {
      if (exhausted_()) break;
      auto ch = random_chromosome();
      if (!make_novel(ch)) continue;
      out.push_back(std::move(ch));
    }
    return out;
  }

  const Individual& tournament() {
    const Individual* best = nullptr;
    for (int i = 0; i < params_.tournament; ++i) {
      const Individual& pick = population_[rng_.index(population_.size())];
      if (!best || pick.fitness > best->fitness) best = &pick;
    }
    return *best;
  }

  std::vector<std::vector<bool>> breed() {
    std::vector<std::vector<bool>> out;
    for (int slot = 0; slot < params_.population; ++slot) {
      if (exhausted_()) break;
      const Individual& p1 = tournament();
      const Individual& p2 = tournament();
      std::vector<bool> child = p1.chrom;
      if (rng_.chance(params_.crossover_rate))
        for (size_t g = 0; g < m_; ++g)
          if (rng_.chance(0.5)) child[g] = p2.chrom[g];
      for (size_t g = 0; g < m_; ++g)
        if (rng_.chance(mutation_rate_)) child[g] = !child[g];
      if (popcount(child) == 0) child[rng_.index(m_)] = true;
      if (make_novel(child)) out.push_back(std::move(child));
    }
    return out;
  }

  GaParams params_;
  ClassId cls_;
  Rng rng_;
  std::vector<std::string> genes_;
  size_t m_ = 0;
  double mutation_rate_ = 0.0;
  bool warned_exhausted_ = false;
  std::set<std::string> tested_;
  std::vector<Individual> population_;
  std::vector<Pending> pending_;
};

inline std::unique_ptr<Selector> make_selector(Strategy strategy,
                                               const SearchContext& ctx,
                                               const ClassId& cls,
                                               uint64_t seed) {
  switch (strategy) {
    case Strategy::SW: return std::make_unique<SwSelector>(ctx, cls, seed);
    case Strategy::HSW: return std::make_unique<HswSelector>(ctx, cls, seed);
    case Strategy::GA: return std::make_unique<GaSelector>(ctx, cls, seed);
  }
  throw std::logic_error("bad strategy");
}

struct EvalOutcome {
  bool failed = false;
  std::string failure;
  SyntheticBatch batch;
  TrainedModel model;
  ScoreVector scores;
  double value = 0.0;
  std::vector<std::string> warnings;
};

inline uint64_t attempt_seed(uint64_t run_seed, long attempt_index) {
  return derive_seed(derive_seed(run_seed, "gen"),
                     static_cast<uint64_t>(attempt_index));
}

inline EvalOutcome evaluate_candidate(const SearchContext& ctx,
                                      const MetricId& objective,
                                      const Candidate& cand, uint64_t run_seed,
                                      long attempt_index) {
  EvalOutcome out;
  try {
    long count = ctx.gen.count_for(cand.examples.message_ids.size());
    out.batch = generate(*ctx.backend, ctx.split->train, cand.examples, count,
                         attempt_seed(run_seed, attempt_index), &out.warnings);
    out.model = train(ctx.model_spec, *ctx.embedder, ctx.split->train,
                      out.batch.messages(), {out.batch.batch_id});
    auto preds = predict(out.model, *ctx.embedder, ctx.split->opt_test);
    out.scores = score_vector(ctx.split->opt_test, preds, ctx.cba);
    out.value = out.scores.get(objective).value;
  } catch (const std::exception& e) {
    out.failed = true;
    out.failure = e.what();
  }
  return out;
}

}  // namespace detail

// Runs one (strategy, objective, example class) setting under a budget.
// `replay` substitutes recorded outcomes for the first attempts instead of
// evaluating them, which both resumes interrupted runs and reconstructs
// finished ones.
inline OptimizationResult run_strategy(
    Strategy strategy, const Setting& setting, const SearchContext& ctx,
    const Budget& budget, uint64_t seed,
    const std::vector<AttemptRecord>* replay = nullptr) {
  budget.validate();
  if (!ctx.split || !ctx.backend || !ctx.embedder || !ctx.embeddings)
    throw std::logic_error("run_strategy: incomplete context");
  if (ctx.projections.empty())
    throw ConfigError("run_strategy: no projections configured");
  const ClassId& cls = setting.example_class;
  if (!ctx.split->train.has_class(cls) ||
      ctx.split->train.class_sizes().at(cls) == 0)
    throw std::runtime_error("class '" + cls + "' has no training messages");
  MetricId objective = setting.objective();

  OptimizationResult result;
  result.baseline_scores = ctx.baseline_scores;
  result.baseline_value = ctx.baseline_scores.get(objective).value;
  result.best_model = ctx.baseline_model;
  result.best_scores = ctx.baseline_scores;
  result.best_value = result.baseline_value;

  auto selector = detail::make_selector(strategy, ctx, cls,
                                        derive_seed(seed, "selector"));
  auto started = std::chrono::steady_clock::now();
  auto out_of_time = [&]() {
    if (!budget.wall_clock_limit_s) return false;
    double elapsed = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    return elapsed >= *budget.wall_clock_limit_s;
  };

  long attempt_index = 0;
  bool winner_needs_rebuild = false;
  while (attempt_index < budget.max_attempts && !out_of_time()) {
    auto wave = selector->next_wave();
    if (wave.empty()) break;
    long room = budget.max_attempts - attempt_index;
    if (static_cast<long>(wave.size()) > room)
      wave.resize(static_cast<size_t>(room));

    std::vector<detail::EvalOutcome> outcomes(wave.size());
    std::vector<char> replayed(wave.size(), 0);
    std::vector<size_t> to_eval;
    for (size_t i = 0; i < wave.size(); ++i) {
      long idx = attempt_index + static_cast<long>(i);
      if (replay && idx < static_cast<long>(replay->size())) {
        const AttemptRecord& rec = (*replay)[static_cast<size_t>(idx)];
        if (rec.example_set.message_ids != wave[i].examples.message_ids ||
            rec.example_set.cls != wave[i].examples.cls)
          throw std::runtime_error(
              "resume manifest does not match this configuration at attempt " +
              std::to_string(idx));
        replayed[i] = 1;
      } else {
        to_eval.push_back(i);
      }
    }
    parallel_for(ctx.jobs, to_eval.size(), [&](size_t j) {
      size_t i = to_eval[j];
      outcomes[i] = detail::evaluate_candidate(
          ctx, objective, wave[i], seed, attempt_index + static_cast<long>(i));
    });

    for (size_t i = 0; i < wave.size(); ++i) {
      AttemptRecord rec;
      if (replayed[i]) {
        rec = (*replay)[static_cast<size_t>(attempt_index)];
        rec.attempt_index = attempt_index;  // dense by construction
      } else {
        const auto& out = outcomes[i];
        rec.attempt_index = attempt_index;
        rec.strategy = strategy_name(strategy);
        rec.example_set = wave[i].examples;
        rec.window = wave[i].window;
        rec.chromosome = wave[i].chromosome;
        rec.failed = out.failed;
        rec.failure = out.failure;
        if (!out.failed) {
          rec.batch_id = out.batch.batch_id;
          rec.scores = out.scores;
          rec.objective_value = out.value;
        }
        for (const auto& w : out.warnings) result.warnings.push_back(w);
      }

      bool improved = false;
      double value = rec.failed ? -std::numeric_limits<double>::infinity()
                                : rec.objective_value;
      if (!rec.failed && value > result.best_value) {
        improved = true;
        result.best_value = value;
        result.best_scores = rec.scores;
        result.best_attempt_index = attempt_index;
        if (replayed[i]) {
          winner_needs_rebuild = true;
        } else {
          result.best_model = outcomes[i].model;
          result.winning_batch = outcomes[i].batch;
          winner_needs_rebuild = false;
        }
      }
      selector->feedback(wave[i], value, improved);
      result.attempts.push_back(std::move(rec));
      ++attempt_index;
    }
  }

  // A replayed winner carries scores but no model; regenerate it once.
  // Deterministic backends reproduce the batch bit-for-bit.
  if (winner_needs_rebuild) {
    const AttemptRecord& rec =
        result.attempts[static_cast<size_t>(result.best_attempt_index)];
    Candidate cand;
    cand.examples = rec.example_set;
    auto out = detail::evaluate_candidate(ctx, objective, cand, seed,
                                          rec.attempt_index);
    if (out.failed)
      throw std::runtime_error("failed to rebuild winning attempt " +
                               std::to_string(rec.attempt_index) + ": " +
                               out.failure);
    result.best_model = out.model;
    result.winning_batch = out.batch;
  }

  for (const auto& w : selector->warnings) result.warnings.push_back(w);
  return result;
}

struct SweepGrid {
  std::vector<Strategy> strategies = {Strategy::SW, Strategy::HSW, Strategy::GA};
  std::vector<MetricKind> metrics = {MetricKind::CR, MetricKind::CBA,
                                     MetricKind::OBA, MetricKind::OF1};
  std::vector<ClassId> classes;

  std::vector<Setting> settings() const {
    std::vector<Setting> out;
    for (const auto& cls : classes)
      for (auto s : strategies)
        for (auto m : metrics) out.push_back({s, m, cls});
    return out;
  }
};

struct SweepOutcome {
  Setting setting;
  bool failed = false;
  std::string failure;
  OptimizationResult result;
};

// Every setting runs independently under the same per-setting budget;
// failures are isolated so one bad setting cannot sink the sweep.
inline std::vector<SweepOutcome> sweep(
    const SweepGrid& grid, const SearchContext& ctx, const Budget& per_setting,
    uint64_t seed,
    const std::map<std::string, std::vector<AttemptRecord>>* replay = nullptr,
    const std::function<void(const SweepOutcome&)>& on_result = {}) {
  std::vector<SweepOutcome> out;
  for (const auto& setting : grid.settings()) {
    SweepOutcome oc;
    oc.setting = setting;
    const std::vector<AttemptRecord>* prior = nullptr;
    if (replay) {
      auto it = replay->find(setting.key());
      if (it != replay->end()) prior = &it->second;
    }
    try {
      oc.result = run_strategy(setting.strategy, setting, ctx, per_setting,
                               derive_seed(seed, setting.key()), prior);
    } catch (const std::exception& e) {
      oc.failed = true;
      oc.failure = e.what();
    }
    if (on_result) on_result(oc);
    out.push_back(std::move(oc));
  }
  return out;
}

}  // namespace autogets
