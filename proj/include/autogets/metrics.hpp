#pragma once
// One-vs-rest confusion accounting and the four objective metrics
// (per-class recall, per-class balanced accuracy, overall balanced
// accuracy, overall F1), plus relative-change deltas between score
// vectors.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "autogets/common.hpp"
#include "autogets/corpus.hpp"
#include "autogets/tsv.hpp"

namespace autogets {

// id -> predicted label; ordered for deterministic traversal.
struct PredictionSet {
  std::map<std::string, ClassId> by_id;

  size_t size() const { return by_id.size(); }
};

enum class MetricKind { CR, CBA, OBA, OF1 };

inline const char* metric_kind_name(MetricKind k) {
  switch (k) {
    case MetricKind::CR: return "CR";
    case MetricKind::CBA: return "CBA";
    case MetricKind::OBA: return "OBA";
    case MetricKind::OF1: return "OF1";
  }
  return "?";
}

inline MetricKind parse_metric_kind(const std::string& s) {
  if (s == "CR") return MetricKind::CR;
  if (s == "CBA") return MetricKind::CBA;
  if (s == "OBA") return MetricKind::OBA;
  if (s == "OF1") return MetricKind::OF1;
  throw ParseError("unknown metric '" + s + "'");
}

inline bool metric_kind_is_overall(MetricKind k) {
  return k == MetricKind::OBA || k == MetricKind::OF1;
}

struct MetricId {
  MetricKind kind = MetricKind::OBA;
  ClassId cls;  // empty for the overall metrics

  bool overall() const { return metric_kind_is_overall(kind); }

  std::string key() const {
    std::string s = metric_kind_name(kind);
    if (!overall()) s += ":" + cls;
    return s;
  }

  friend bool operator==(const MetricId& a, const MetricId& b) {
    return a.kind == b.kind && a.cls == b.cls;
  }
  friend bool operator<(const MetricId& a, const MetricId& b) {
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.cls < b.cls;
  }
};

inline MetricId parse_metric_id(const std::string& s) {
  auto colon = s.find(':');
  MetricId id;
  if (colon == std::string::npos) {
    id.kind = parse_metric_kind(s);
    if (!id.overall())
      throw ParseError("metric '" + s + "' requires a class qualifier");
    return id;
  }
  id.kind = parse_metric_kind(s.substr(0, colon));
  id.cls = s.substr(colon + 1);
  if (id.overall())
    throw ParseError("metric '" + s + "' does not take a class qualifier");
  if (id.cls.empty()) throw ParseError("metric '" + s + "': empty class");
  return id;
}

struct ConfusionCell {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
};

struct ConfusionCounts {
  std::map<ClassId, ConfusionCell> per_class;
  ConfusionCell pooled;  // micro sums over classes
  size_t evaluated = 0;
};

inline ConfusionCounts confusion(const LabeledDataset& truth,
                                 const PredictionSet& preds) {
  std::vector<std::string> missing, extra;
  std::set<std::string> truth_ids;
  for (const auto& m : truth.messages) truth_ids.insert(m.id);
  for (const auto& m : truth.messages)
    if (!preds.by_id.count(m.id)) missing.push_back(m.id);
  for (const auto& [id, lbl] : preds.by_id)
    if (!truth_ids.count(id)) extra.push_back(id);
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "prediction coverage mismatch";
    if (!missing.empty()) msg += "; missing ids: " + join(missing, ", ");
    if (!extra.empty()) msg += "; extra ids: " + join(extra, ", ");
    throw std::runtime_error(msg);
  }

  ConfusionCounts out;
  out.evaluated = truth.size();
  for (const auto& c : truth.schema) out.per_class[c];
  for (const auto& m : truth.messages) {
    const ClassId& pred = preds.by_id.at(m.id);
    for (const auto& c : truth.schema) {
      ConfusionCell& cell = out.per_class[c];
      bool is_truth = (m.label == c);
      bool is_pred = (pred == c);
      if (is_truth && is_pred) ++cell.tp;
      else if (!is_truth && is_pred) ++cell.fp;
      else if (is_truth && !is_pred) ++cell.fn;
      else ++cell.tn;
    }
  }
  for (const auto& [cls, cell] : out.per_class) {
    out.pooled.tp += cell.tp;
    out.pooled.fp += cell.fp;
    out.pooled.tn += cell.tn;
    out.pooled.fn += cell.fn;
  }
  return out;
}

// Value plus a zero-denominator flag; undefined values carry 0.0 and are
// surfaced as warnings by reports rather than aborting a sweep.
struct MetricValue {
  double value = 0.0;
  bool defined = true;
};

inline MetricValue ratio_or_undefined(double num, double den) {
  if (den <= 0.0) return {0.0, false};
  return {num / den, true};
}

// Mean of two ratio terms; undefined if either denominator is zero.
inline MetricValue half_sum(double n1, double d1, double n2, double d2) {
  if (d1 <= 0.0 || d2 <= 0.0) return {0.0, false};
  return {0.5 * (n1 / d1 + n2 / d2), true};
}

// printed: balanced accuracy exactly as the formulas print it,
// 1/2(TP/(TP+FP) + TN/(TN+FN)); standard: 1/2(TPR + TNR).
enum class CbaVariant { printed, standard };

inline CbaVariant parse_cba_variant(const std::string& s) {
  if (s == "printed") return CbaVariant::printed;
  if (s == "standard") return CbaVariant::standard;
  throw ConfigError("cba_variant must be 'printed' or 'standard', got '" + s + "'");
}

inline MetricValue recall_value(const ConfusionCell& c) {
  return ratio_or_undefined(static_cast<double>(c.tp),
                            static_cast<double>(c.tp + c.fn));
}

inline MetricValue cba_value(const ConfusionCell& c, CbaVariant v) {
  if (v == CbaVariant::printed)
    return half_sum(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp),
                    static_cast<double>(c.tn), static_cast<double>(c.tn + c.fn));
  return half_sum(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn),
                  static_cast<double>(c.tn), static_cast<double>(c.tn + c.fp));
}

inline MetricValue of1_value(const ConfusionCell& pooled) {
  return ratio_or_undefined(2.0 * static_cast<double>(pooled.tp),
                            static_cast<double>(2 * pooled.tp + pooled.fp + pooled.fn));
}

inline MetricValue oba_value(const ConfusionCell& pooled, CbaVariant v) {
  return cba_value(pooled, v);
}

struct ScoreVector {
  std::vector<ClassId> schema;
  std::vector<MetricValue> cr;   // schema order
  std::vector<MetricValue> cba;  // schema order
  MetricValue oba;
  MetricValue of1;

  size_t class_index(const ClassId& c) const {
    for (size_t i = 0; i < schema.size(); ++i)
      if (schema[i] == c) return i;
    throw std::runtime_error("class '" + c + "' not in score vector schema");
  }

  MetricValue get(const MetricId& id) const {
    switch (id.kind) {
      case MetricKind::OBA: return oba;
      case MetricKind::OF1: return of1;
      case MetricKind::CR: return cr[class_index(id.cls)];
      case MetricKind::CBA: return cba[class_index(id.cls)];
    }
    throw std::logic_error("bad metric kind");
  }

  // Column order of the serialized form and of every report.
  std::vector<MetricId> ids() const {
    std::vector<MetricId> out;
    for (const auto& c : schema) out.push_back({MetricKind::CR, c});
    for (const auto& c : schema) out.push_back({MetricKind::CBA, c});
    out.push_back({MetricKind::OBA, {}});
    out.push_back({MetricKind::OF1, {}});
    return out;
  }

  std::vector<std::string> undefined_keys() const {
    std::vector<std::string> out;
    for (const auto& id : ids())
      if (!get(id).defined) out.push_back(id.key());
    return out;
  }
};

inline ScoreVector score_vector(const LabeledDataset& truth,
                                const PredictionSet& preds,
                                CbaVariant variant = CbaVariant::printed) {
  ConfusionCounts counts = confusion(truth, preds);
  ScoreVector sv;
  sv.schema = truth.schema;
  for (const auto& c : sv.schema) {
    const ConfusionCell& cell = counts.per_class.at(c);
    sv.cr.push_back(recall_value(cell));
    sv.cba.push_back(cba_value(cell, variant));
  }
  sv.oba = oba_value(counts.pooled, variant);
  sv.of1 = of1_value(counts.pooled);
  return sv;
}

// Relative change in percent; a zero "before" with a positive "after" has
// no finite relative change and is flagged infinite (rendered "######").
struct Delta {
  double value = 0.0;
  bool infinite = false;
};

inline Delta delta_of(double before, double after) {
  if (before > 0.0) return {100.0 * (after - before) / before, false};
  if (after > 0.0) return {0.0, true};
  return {0.0, false};
}

struct DeltaVector {
  std::vector<ClassId> schema;
  std::vector<Delta> cr;
  std::vector<Delta> cba;
  Delta oba;
  Delta of1;

  Delta get(const MetricId& id) const {
    switch (id.kind) {
      case MetricKind::OBA: return oba;
      case MetricKind::OF1: return of1;
      case MetricKind::CR:
      case MetricKind::CBA:
        for (size_t i = 0; i < schema.size(); ++i)
          if (schema[i] == id.cls)
            return id.kind == MetricKind::CR ? cr[i] : cba[i];
        throw std::runtime_error("class '" + id.cls + "' not in delta schema");
    }
    throw std::logic_error("bad metric kind");
  }
};

inline DeltaVector delta_percent(const ScoreVector& before, const ScoreVector& after) {
  if (before.schema != after.schema)
    throw std::runtime_error("delta_percent: score vectors cover different schemas");
  DeltaVector dv;
  dv.schema = before.schema;
  for (size_t i = 0; i < dv.schema.size(); ++i) {
    dv.cr.push_back(delta_of(before.cr[i].value, after.cr[i].value));
    dv.cba.push_back(delta_of(before.cba[i].value, after.cba[i].value));
  }
  dv.oba = delta_of(before.oba.value, after.oba.value);
  dv.of1 = delta_of(before.of1.value, after.of1.value);
  return dv;
}

// TSV form: header row of metric keys, one row of values; undefined
// entries are listed in a trailing comment line.
inline std::string serialize_scores(const ScoreVector& sv) {
  std::vector<std::string> head, vals;
  for (const auto& id : sv.ids()) {
    head.push_back(id.key());
    vals.push_back(fmt_double(sv.get(id).value));
  }
  std::string out = tsv_line(head) + tsv_line(vals);
  auto undef = sv.undefined_keys();
  if (!undef.empty()) out += "# undefined: " + join(undef, ", ") + "\n";
  return out;
}

inline ScoreVector parse_scores(std::string_view text) {
  auto rows = parse_tsv(text, /*skip_comments=*/true);
  if (rows.size() != 2)
    throw ParseError("score file: expected header and one value row");
  const auto& head = rows[0].fields;
  const auto& vals = rows[1].fields;
  if (head.size() != vals.size() || head.size() < 4)
    throw ParseError("score file: malformed columns");
  ScoreVector sv;
  size_t n = (head.size() - 2) / 2;
  for (size_t i = 0; i < n; ++i) {
    MetricId id = parse_metric_id(head[i]);
    if (id.kind != MetricKind::CR)
      throw ParseError("score file: unexpected column " + head[i]);
    sv.schema.push_back(id.cls);
    sv.cr.push_back({parse_double(vals[i], "score"), true});
  }
  for (size_t i = 0; i < n; ++i) {
    MetricId id = parse_metric_id(head[n + i]);
    if (id.kind != MetricKind::CBA || id.cls != sv.schema[i])
      throw ParseError("score file: unexpected column " + head[n + i]);
    sv.cba.push_back({parse_double(vals[n + i], "score"), true});
  }
  if (head[2 * n] != "OBA" || head[2 * n + 1] != "OF1")
    throw ParseError("score file: missing overall columns");
  sv.oba = {parse_double(vals[2 * n], "score"), true};
  sv.of1 = {parse_double(vals[2 * n + 1], "score"), true};
  return sv;
}

}  // namespace autogets
