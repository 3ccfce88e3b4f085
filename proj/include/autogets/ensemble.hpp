#pragma once
// Multi-phase, multi-objective controller. Each phase samples an objective
// from a pool, picks the settings most likely to improve it (via the
// knowledge map, a systematic sweep when no map exists, or a fallback
// grid), splits the phase budget proportionally to the map's historical
// improvements, runs the settings, banks the phase's best model in a model
// pool, and — when a weighted assessment of the whole score vector
// strictly improves — appends the winning synthetic batch to the working
// training data for all later phases.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "autogets/classifier.hpp"
#include "autogets/common.hpp"
#include "autogets/knowledge.hpp"
#include "autogets/metrics.hpp"
#include "autogets/search.hpp"

namespace autogets {

struct Objective {
  std::string id;
  MetricId target;
  std::optional<double> threshold;  // constraint floor checked at final selection

  void validate() const {
    if (threshold && (*threshold < 0.0 || *threshold > 1.0))
      throw ConfigError("objective '" + id + "': threshold must be in [0,1]");
  }
};

struct ObjectivePool {
  std::vector<Objective> objectives;
  uint64_t sampler_seed = 0;

  void validate() const {
    if (objectives.empty()) throw ConfigError("objective pool is empty");
    for (const auto& o : objectives) o.validate();
  }
};

struct PoolEntry {
  TrainedModel model;
  ScoreVector scores;
  int phase = 0;
  std::string setting_key;  // "incumbent" when no setting beat the incumbent
};

using ModelPool = std::vector<PoolEntry>;

// Weighted sum over score-vector entries; undefined metrics contribute 0.
struct AssessmentFn {
  std::vector<std::pair<MetricId, double>> weights;

  void validate() const {
    bool any_positive = false;
    for (const auto& [id, w] : weights) {
      if (w < 0.0)
        throw ConfigError("assessment weight for " + id.key() +
                          " must be >= 0");
      any_positive = any_positive || w > 0.0;
    }
    if (!any_positive)
      throw ConfigError("assessment needs at least one positive weight");
  }

  double value(const ScoreVector& sv) const {
    double s = 0.0;
    for (const auto& [id, w] : weights) s += w * sv.get(id).value;
    return s;
  }
};

// Splits an integer budget proportionally to non-negative improvement
// scores using the largest-remainder method (ties to the earliest
// setting), then repairs upward so every setting keeps at least one
// attempt. An all-zero score vector degrades to an equal split.
inline std::vector<long> allocate(long budget, const std::vector<double>& x) {
  size_t n = x.size();
  if (n == 0) throw ConfigError("allocate: no settings");
  if (budget < static_cast<long>(n))
    throw ConfigError("allocate: budget " + std::to_string(budget) +
                      " cannot give " + std::to_string(n) +
                      " settings one attempt each");
  double total = 0.0;
  for (double v : x) {
    if (v < 0.0) throw ConfigError("allocate: improvement scores must be >= 0");
    total += v;
  }

  std::vector<long> a(n);
  if (total <= 0.0) {
    long base = budget / static_cast<long>(n);
    long extra = budget % static_cast<long>(n);
    for (size_t i = 0; i < n; ++i)
      a[i] = base + (static_cast<long>(i) < extra ? 1 : 0);
    return a;
  }

  std::vector<double> frac(n);
  long used = 0;
  for (size_t i = 0; i < n; ++i) {
    double share = static_cast<double>(budget) * x[i] / total;
    a[i] = static_cast<long>(std::floor(share));
    frac[i] = share - static_cast<double>(a[i]);
    used += a[i];
  }
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t l, size_t r) { return frac[l] > frac[r]; });
  long leftover = budget - used;
  for (long g = 0; g < leftover; ++g) a[order[static_cast<size_t>(g)]] += 1;

  // Repair: every setting keeps at least one attempt. While any setting
  // sits at zero, move one attempt from the currently largest allocation
  // (ties -> earliest). budget >= n guarantees a donor with >= 2 exists.
  for (size_t i = 0; i < n; ++i) {
    if (a[i] > 0) continue;
    size_t donor = 0;
    for (size_t j = 1; j < n; ++j)
      if (a[j] > a[donor]) donor = j;
    a[donor] -= 1;
    a[i] += 1;
  }
  return a;
}

struct EnsembleParams {
  int phases = 1;
  long phase_budget = 12;
  int k = 3;  // settings taken from the map per phase
  // Stand-in improvement score when an infinite delta has no finite
  // positive column-mate to derive a cap from.
  double infinite_cap_fallback = 100.0;

  void validate() const {
    if (phases < 1) throw ConfigError("phases must be >= 1");
    if (phase_budget < 1) throw ConfigError("phase budget must be >= 1");
    if (k < 1) throw ConfigError("top-k must be >= 1");
  }
};

struct PhaseRecord {
  int phase = 0;
  std::string objective_id;
  MetricId target;
  bool swept = false;     // map was absent: systematic sweep built it
  bool fallback = false;  // map had no positive entry for the target
  std::vector<std::string> setting_keys;
  std::vector<long> allocations;
  Delta best_delta;  // phase best vs. phase-start incumbent, on the target
  double s_before = 0.0;
  double s_after = 0.0;
  bool accepted = false;  // batch appended to the working training data
  std::string accepted_batch_id;
};

struct EnsembleResult {
  ModelPool pool;
  KnowledgeMap map;
  std::vector<PhaseRecord> phases;
  TrainedModel final_model;       // incumbent after the last phase
  ScoreVector final_scores;
  LabeledDataset working_train;   // original train plus accepted batches
  std::vector<std::string> warnings;
};

struct MapProvenance {
  std::string dataset_hash;
  std::string config_hash;
};

namespace detail {

// The phase's settings are independent runs merged deterministically by
// setting order: each outcome lands in its own slot, so concurrent
// execution is bit-identical to sequential. When running settings in
// parallel the inner wave parallelism is disabled to avoid nesting.
inline std::vector<SweepOutcome> run_settings(
    const std::vector<Setting>& settings, const std::vector<long>& budgets,
    const SearchContext& ctx, uint64_t seed_base) {
  std::vector<SweepOutcome> out(settings.size());
  SearchContext inner = ctx;
  if (settings.size() > 1) inner.jobs = 1;
  parallel_for(ctx.jobs, settings.size(), [&](size_t i) {
    out[i].setting = settings[i];
    try {
      out[i].result = run_strategy(settings[i].strategy, settings[i], inner,
                                   Budget{budgets[i], std::nullopt},
                                   derive_seed(seed_base, settings[i].key()));
    } catch (const std::exception& e) {
      out[i].failed = true;
      out[i].failure = e.what();
    }
  });
  return out;
}

}  // namespace detail

inline EnsembleResult run_ensemble(
    const ObjectivePool& objectives, const AssessmentFn& assessment,
    const EnsembleParams& params, std::optional<KnowledgeMap> initial_map,
    const SweepGrid& grid, const SearchContext& base_ctx, uint64_t seed,
    const MapProvenance& prov = {},
    const std::function<void(const PhaseRecord&)>& on_phase = {}) {
  objectives.validate();
  assessment.validate();
  params.validate();
  if (!base_ctx.split || !base_ctx.backend || !base_ctx.embedder ||
      !base_ctx.embeddings)
    throw std::logic_error("run_ensemble: incomplete context");

  EnsembleResult res;
  // Working copies: the training data and embedding table grow as batches
  // are accepted; the split's test partitions never change.
  Split working = *base_ctx.split;
  EmbeddingTable table = *base_ctx.embeddings;
  SearchContext ctx = base_ctx;
  ctx.split = &working;
  ctx.embeddings = &table;

  TrainedModel incumbent_model = base_ctx.baseline_model;
  ScoreVector incumbent_scores = base_ctx.baseline_scores;

  bool have_map = initial_map.has_value();
  if (have_map) res.map = std::move(*initial_map);

  Rng sampler(objectives.sampler_seed);

  for (int phase = 1; phase <= params.phases; ++phase) {
    const Objective& obj =
        objectives.objectives[sampler.index(objectives.objectives.size())];
    PhaseRecord rec;
    rec.phase = phase;
    rec.objective_id = obj.id;
    rec.target = obj.target;

    ctx.baseline_model = incumbent_model;
    ctx.baseline_scores = incumbent_scores;
    uint64_t phase_seed = derive_seed(seed, "phase:" + std::to_string(phase));

    std::vector<Setting> settings;
    std::vector<long> budgets;
    if (!have_map) {
      // No knowledge yet: spend this phase on the systematic sweep that
      // creates it. Every grid cell gets an equal slice (at least one
      // attempt, so tiny budgets still cover the grid).
      rec.swept = true;
      settings = grid.settings();
      long per = std::max(1L, params.phase_budget /
                                  static_cast<long>(std::max<size_t>(
                                      settings.size(), 1)));
      budgets.assign(settings.size(), per);
    } else {
      auto ranked = query_top_k(res.map, obj.target, params.k);
      if (ranked.empty()) {
        // The map knows nothing that improves this target: fall back to
        // the whole strategy/metric grid on the target's own class (all
        // classes when the target is an overall metric).
        rec.fallback = true;
        std::vector<ClassId> classes =
            obj.target.overall() ? grid.classes
                                 : std::vector<ClassId>{obj.target.cls};
        for (const auto& cls : classes)
          for (Strategy s : grid.strategies)
            for (MetricKind m : grid.metrics) settings.push_back({s, m, cls});
        if (static_cast<long>(settings.size()) > params.phase_budget)
          settings.resize(static_cast<size_t>(params.phase_budget));
        budgets = allocate(params.phase_budget,
                           std::vector<double>(settings.size(), 0.0));
      } else {
        // Cap infinities to twice the largest finite positive delta in the
        // target's column so shares stay well-defined while preserving
        // their dominance.
        double cap_base = 0.0;
        for (const auto& e : res.map.entries) {
          Delta d = e.deltas.get(obj.target);
          if (!d.infinite && d.value > cap_base) cap_base = d.value;
        }
        double cap = cap_base > 0.0 ? 2.0 * cap_base
                                    : params.infinite_cap_fallback;
        if (static_cast<long>(ranked.size()) > params.phase_budget)
          ranked.resize(static_cast<size_t>(params.phase_budget));
        std::vector<double> x;
        for (const auto& r : ranked) {
          settings.push_back(r.setting);
          x.push_back(r.delta.infinite ? cap : std::max(r.delta.value, 0.0));
        }
        budgets = allocate(params.phase_budget, x);
      }
    }
    for (const auto& s : settings) rec.setting_keys.push_back(s.key());
    rec.allocations = budgets;

    auto outcomes = detail::run_settings(settings, budgets, ctx, phase_seed);

    if (rec.swept) {
      res.map = build_map(outcomes, incumbent_scores, prov.dataset_hash,
                          prov.config_hash, budgets.empty() ? 0 : budgets[0]);
      have_map = true;
    } else {
      for (const auto& oc : outcomes) {
        if (oc.failed) continue;
        MapEntry e;
        e.strategy = oc.setting.strategy;
        e.objective = oc.setting.objective();
        e.example_class = oc.setting.example_class;
        e.deltas = delta_percent(incumbent_scores, oc.result.best_scores);
        e.best_value = oc.result.best_value;
        e.baseline_value = oc.result.baseline_value;
        res.map.upsert(std::move(e));
      }
    }

    // Phase best: the incumbent holds unless a setting strictly beats it
    // on the sampled target; ties resolve to the earliest setting.
    const OptimizationResult* best_result = nullptr;
    std::string best_key = "incumbent";
    double best_target = incumbent_scores.get(obj.target).value;
    for (const auto& oc : outcomes) {
      if (oc.failed) {
        res.warnings.push_back("[" + oc.setting.key() + "] " + oc.failure);
        continue;
      }
      for (const auto& w : oc.result.warnings)
        res.warnings.push_back("[" + oc.setting.key() + "] " + w);
      double v = oc.result.best_scores.get(obj.target).value;
      if (v > best_target) {
        best_target = v;
        best_result = &oc.result;
        best_key = oc.setting.key();
      }
    }

    const TrainedModel& best_model =
        best_result ? best_result->best_model : incumbent_model;
    const ScoreVector& best_scores =
        best_result ? best_result->best_scores : incumbent_scores;

    rec.best_delta =
        delta_of(incumbent_scores.get(obj.target).value, best_target);
    rec.s_before = assessment.value(incumbent_scores);
    rec.s_after = assessment.value(best_scores);

    res.pool.push_back({best_model, best_scores, phase, best_key});

    if (best_result && best_result->winning_batch &&
        rec.s_after > rec.s_before) {
      rec.accepted = true;
      rec.accepted_batch_id = best_result->winning_batch->batch_id;
      for (const auto& m : best_result->winning_batch->messages()) {
        working.train.messages.push_back(m);
        table.emplace(m.id, base_ctx.embedder->embed(m.text));
      }
      incumbent_model = best_model;
      incumbent_scores = best_scores;
    }

    res.phases.push_back(rec);
    if (on_phase) on_phase(rec);
  }

  res.final_model = incumbent_model;
  res.final_scores = incumbent_scores;
  res.working_train = working.train;
  return res;
}

struct Constraint {
  MetricId target;
  double min_threshold = 0.0;
};

struct FinalSelection {
  size_t pool_index = 0;
  TrainedModel model;
  ScoreVector scores;
  std::vector<std::string> violations;  // empty when all constraints hold
};

// Picks the pool entry maximizing the criterion among those meeting every
// constraint (ties -> earliest phase). If nothing is feasible, returns the
// unconstrained maximum along with the list of constraints it violates.
inline FinalSelection select_final(const ModelPool& pool,
                                   const AssessmentFn& criterion,
                                   const std::vector<Constraint>& constraints = {}) {
  if (pool.empty()) throw std::runtime_error("select_final: model pool is empty");
  criterion.validate();

  auto violations_of = [&](const ScoreVector& sv) {
    std::vector<std::string> out;
    for (const auto& c : constraints) {
      double v = sv.get(c.target).value;
      if (v < c.min_threshold)
        out.push_back(c.target.key() + " = " + fmt_double(v) + " < " +
                      fmt_double(c.min_threshold));
    }
    return out;
  };

  auto pick = [&](bool feasible_only) -> std::optional<size_t> {
    std::optional<size_t> best;
    double best_value = 0.0;
    for (size_t i = 0; i < pool.size(); ++i) {
      if (feasible_only && !violations_of(pool[i].scores).empty()) continue;
      double v = criterion.value(pool[i].scores);
      if (!best || v > best_value) {
        best = i;
        best_value = v;
      }
    }
    return best;
  };

  FinalSelection sel;
  if (auto idx = pick(true)) {
    sel.pool_index = *idx;
  } else {
    sel.pool_index = *pick(false);
    sel.violations = violations_of(pool[sel.pool_index].scores);
  }
  sel.model = pool[sel.pool_index].model;
  sel.scores = pool[sel.pool_index].scores;
  return sel;
}

}  // namespace autogets
