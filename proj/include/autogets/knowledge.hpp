#pragma once
// Knowledge maps: per-setting cross-impact deltas harvested from a sweep,
// best-strategy summaries under a tie band, top-k lookup for a target
// metric, and a versioned TSV persistence format.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "autogets/common.hpp"
#include "autogets/metrics.hpp"
#include "autogets/search.hpp"
#include "autogets/tsv.hpp"

namespace autogets {

struct MapEntry {
  Strategy strategy = Strategy::SW;
  MetricId objective;
  ClassId example_class;
  DeltaVector deltas;  // covers every metric column in schema order
  double best_value = 0.0;
  double baseline_value = 0.0;

  Setting setting() const { return {strategy, objective.kind, example_class}; }
  std::string key() const { return setting().key(); }
};

struct KnowledgeMap {
  std::vector<MapEntry> entries;
  std::vector<ClassId> schema;
  // Provenance: which data and configuration produced these deltas.
  std::string dataset_hash;
  std::string config_hash;
  long budget = 0;  // attempts per setting

  const MapEntry* find(const std::string& setting_key) const {
    for (const auto& e : entries)
      if (e.key() == setting_key) return &e;
    return nullptr;
  }

  // Insert or replace, keeping at most one entry per setting.
  void upsert(MapEntry entry) {
    for (auto& e : entries) {
      if (e.key() == entry.key()) {
        e = std::move(entry);
        return;
      }
    }
    entries.push_back(std::move(entry));
  }
};

struct BestSummary {
  // (objective metric, example class) -> strategies within the tie band.
  std::map<std::pair<MetricId, ClassId>, std::set<std::string>> cells;
};

namespace detail {

inline bool metric_values_equal(const MetricValue& a, const MetricValue& b) {
  return a.defined == b.defined && a.value == b.value;
}

inline bool scores_equal(const ScoreVector& a, const ScoreVector& b) {
  if (a.schema != b.schema) return false;
  for (size_t i = 0; i < a.schema.size(); ++i) {
    if (!metric_values_equal(a.cr[i], b.cr[i])) return false;
    if (!metric_values_equal(a.cba[i], b.cba[i])) return false;
  }
  return metric_values_equal(a.oba, b.oba) && metric_values_equal(a.of1, b.of1);
}

}  // namespace detail

// Folds successful sweep results into one entry per setting. Every result
// must have been measured against the same baseline score vector.
inline KnowledgeMap build_map(const std::vector<SweepOutcome>& outcomes,
                              const ScoreVector& baseline,
                              const std::string& dataset_hash = "",
                              const std::string& config_hash = "",
                              long budget = 0) {
  KnowledgeMap map;
  map.schema = baseline.schema;
  map.dataset_hash = dataset_hash;
  map.config_hash = config_hash;
  map.budget = budget;
  for (const auto& oc : outcomes) {
    if (oc.failed) continue;
    if (!detail::scores_equal(oc.result.baseline_scores, baseline))
      throw std::runtime_error("mixed baselines in sweep results (setting " +
                               oc.setting.key() + ")");
    MapEntry e;
    e.strategy = oc.setting.strategy;
    e.objective = oc.setting.objective();
    e.example_class = oc.setting.example_class;
    e.deltas = delta_percent(baseline, oc.result.best_scores);
    e.best_value = oc.result.best_value;
    e.baseline_value = oc.result.baseline_value;
    map.upsert(std::move(e));
  }
  return map;
}

// Per (objective, class) cell, the set of strategies whose own-objective
// delta lies within `band` percentage points of the cell's maximum. An
// infinite delta outranks every finite one and ties only with other
// infinites.
inline BestSummary summarize_best(const KnowledgeMap& map, double band = 0.03) {
  if (band < 0) throw ConfigError("summary band must be >= 0");
  BestSummary out;
  std::map<std::pair<MetricId, ClassId>, std::vector<const MapEntry*>> cells;
  for (const auto& e : map.entries)
    cells[{e.objective, e.example_class}].push_back(&e);
  for (const auto& [key, entries] : cells) {
    bool any_infinite = false;
    double max_finite = 0.0;
    bool have_finite = false;
    for (const auto* e : entries) {
      Delta d = e->deltas.get(e->objective);
      if (d.infinite) {
        any_infinite = true;
      } else if (!have_finite || d.value > max_finite) {
        max_finite = d.value;
        have_finite = true;
      }
    }
    std::set<std::string>& selected = out.cells[key];
    for (const auto* e : entries) {
      Delta d = e->deltas.get(e->objective);
      if (any_infinite ? d.infinite : d.value >= max_finite - band)
        selected.insert(strategy_name(e->strategy));
    }
  }
  return out;
}

struct RankedSetting {
  Setting setting;
  Delta delta;  // the entry's delta on the queried target
};

// Entries that improved `target` (infinite or strictly positive), ranked
// best-first: infinite entries, then by delta descending, ties broken by
// strategy name, example class, then objective key. Cross-metric and
// cross-class entries compete on equal footing — a setting that optimized
// OF1 on one class may be the best lever for another class's recall.
inline std::vector<RankedSetting> query_top_k(const KnowledgeMap& map,
                                              const MetricId& target, int k) {
  if (k < 1) throw ConfigError("query_top_k: k must be >= 1");
  std::vector<const MapEntry*> hits;
  for (const auto& e : map.entries) {
    Delta d = e.deltas.get(target);
    if (d.infinite || d.value > 0.0) hits.push_back(&e);
  }
  std::sort(hits.begin(), hits.end(), [&](const MapEntry* a, const MapEntry* b) {
    Delta da = a->deltas.get(target), db = b->deltas.get(target);
    if (da.infinite != db.infinite) return da.infinite;
    if (!da.infinite && da.value != db.value) return da.value > db.value;
    std::string sa = strategy_name(a->strategy), sb = strategy_name(b->strategy);
    if (sa != sb) return sa < sb;
    if (a->example_class != b->example_class)
      return a->example_class < b->example_class;
    return a->objective.key() < b->objective.key();
  });
  std::vector<RankedSetting> out;
  for (const auto* e : hits) {
    if (static_cast<int>(out.size()) >= k) break;
    out.push_back({e->setting(), e->deltas.get(target)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: a `#` provenance block, then one TSV row per entry with a
// delta column for every metric in schema order. Infinite deltas are
// stored as the literal `inf`.

inline const char* kMapMagic = "# autogets-map v1";

namespace detail {

inline std::string delta_field(const Delta& d) {
  return d.infinite ? "inf" : fmt_double(d.value);
}

inline Delta parse_delta_field(const std::string& s) {
  if (s == "inf") return {0.0, true};
  return {parse_double(s, "delta"), false};
}

}  // namespace detail

inline std::string serialize_map(const KnowledgeMap& map) {
  std::string out;
  out += kMapMagic;
  out += "\n# dataset: " + map.dataset_hash;
  out += "\n# config: " + map.config_hash;
  out += "\n# budget: " + std::to_string(map.budget);
  out += "\n";

  ScoreVector probe;
  probe.schema = map.schema;
  std::vector<std::string> head = {"strategy", "objective", "example_class",
                                   "baseline_value", "best_value"};
  for (const auto& id : probe.ids()) head.push_back(id.key());
  out += tsv_line(head) + "\n";

  for (const auto& e : map.entries) {
    std::vector<std::string> row = {strategy_name(e.strategy), e.objective.key(),
                                    e.example_class, fmt_double(e.baseline_value),
                                    fmt_double(e.best_value)};
    for (const auto& id : probe.ids())
      row.push_back(detail::delta_field(e.deltas.get(id)));
    out += tsv_line(row) + "\n";
  }
  return out;
}

inline KnowledgeMap parse_map(const std::string& text) {
  auto lines = split_char(text, '\n');
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    return pos < lines.size() ? lines[pos++] : std::string();
  };

  if (next_line() != kMapMagic)
    throw ParseError("not a knowledge map file (bad or missing header magic)");
  KnowledgeMap map;
  auto prov = [&](const char* prefix) {
    std::string line = next_line();
    std::string p(prefix);
    if (line.rfind(p, 0) != 0)
      throw ParseError("knowledge map provenance incomplete: expected '" + p +
                       "' line");
    return line.substr(p.size());
  };
  map.dataset_hash = prov("# dataset: ");
  map.config_hash = prov("# config: ");
  map.budget = parse_long(prov("# budget: "), "map budget");

  std::string body;
  while (pos < lines.size()) {
    body += lines[pos++];
    body += "\n";
  }
  auto rows = parse_tsv(body);
  if (rows.empty()) throw ParseError("knowledge map has no header row");

  // Schema is recovered from the per-class delta columns.
  const auto& head = rows[0].fields;
  if (head.size() < 7 || head[0] != "strategy" || head[1] != "objective" ||
      head[2] != "example_class" || head[3] != "baseline_value" ||
      head[4] != "best_value")
    throw ParseError("knowledge map header malformed");
  size_t col = 5;
  while (col < head.size() && head[col].rfind("CR:", 0) == 0)
    map.schema.push_back(head[col++].substr(3));
  if (map.schema.empty())
    throw ParseError("knowledge map header malformed: no CR columns");
  ScoreVector probe;
  probe.schema = map.schema;
  std::vector<std::string> expect = {"strategy", "objective", "example_class",
                                     "baseline_value", "best_value"};
  for (const auto& id : probe.ids()) expect.push_back(id.key());
  if (head != expect) throw ParseError("knowledge map header malformed");

  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r].fields;
    if (f.size() != expect.size())
      throw ParseError("knowledge map row " + std::to_string(rows[r].line_no) +
                       " has " + std::to_string(f.size()) + " fields, expected " +
                       std::to_string(expect.size()));
    MapEntry e;
    e.strategy = parse_strategy(f[0]);
    e.objective = parse_metric_id(f[1]);
    e.example_class = f[2];
    e.baseline_value = parse_double(f[3], "baseline_value");
    e.best_value = parse_double(f[4], "best_value");
    e.deltas.schema = map.schema;
    size_t c = 5;
    for (size_t i = 0; i < map.schema.size(); ++i)
      e.deltas.cr.push_back(detail::parse_delta_field(f[c++]));
    for (size_t i = 0; i < map.schema.size(); ++i)
      e.deltas.cba.push_back(detail::parse_delta_field(f[c++]));
    e.deltas.oba = detail::parse_delta_field(f[c++]);
    e.deltas.of1 = detail::parse_delta_field(f[c++]);
    map.upsert(std::move(e));
  }
  return map;
}

inline void save_map(const KnowledgeMap& map, const std::string& path) {
  write_file(path, serialize_map(map));
}

inline KnowledgeMap load_map(const std::string& path) {
  return parse_map(read_file(path));
}

// Guards a loaded map against the current run. A schema mismatch makes the
// map structurally unusable and always errors, naming the first divergence.
// A dataset-hash mismatch means the deltas were measured elsewhere; that is
// an error unless the caller forces it, in which case it degrades to a
// warning ("factors usually do not change much" is a judgment call the
// user must make explicitly).
inline void check_map(const KnowledgeMap& map,
                      const std::vector<ClassId>& schema,
                      const std::string& dataset_hash, bool force,
                      std::vector<std::string>* warnings = nullptr) {
  size_t n = std::min(map.schema.size(), schema.size());
  for (size_t i = 0; i < n; ++i)
    if (map.schema[i] != schema[i])
      throw ConfigError("knowledge map schema mismatch: map has '" +
                        map.schema[i] + "' where dataset has '" + schema[i] +
                        "'");
  if (map.schema.size() > schema.size())
    throw ConfigError("knowledge map schema mismatch: map has extra class '" +
                      map.schema[n] + "'");
  if (schema.size() > map.schema.size())
    throw ConfigError("knowledge map schema mismatch: map lacks class '" +
                      schema[n] + "'");
  if (!map.dataset_hash.empty() && !dataset_hash.empty() &&
      map.dataset_hash != dataset_hash) {
    if (!force)
      throw ConfigError(
          "knowledge map was built from a different dataset (hash " +
          map.dataset_hash + ", current " + dataset_hash +
          "); pass --force to use it anyway");
    if (warnings)
      warnings->push_back("knowledge map was built from a different dataset (hash " +
                          map.dataset_hash + ", current " + dataset_hash +
                          "); using it as advisory");
  }
}

}  // namespace autogets
