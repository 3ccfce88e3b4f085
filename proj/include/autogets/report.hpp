#pragma once
// Human-readable renderings of a knowledge map: the per-objective
// improvement grid, the best-strategy summary, and one cross-impact table
// per (strategy, objective metric) showing how optimizing one class's
// metric moved every other column. Markdown and TSV renderers share the
// same table structures so both formats always agree.

#include <cstdio>
#include <string>
#include <vector>

#include "autogets/knowledge.hpp"
#include "autogets/metrics.hpp"
#include "autogets/tsv.hpp"

namespace autogets {

struct ReportTable {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string fixed(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, v);
  return buf;
}

// Infinite relative gains (a zero baseline that became positive) cannot be
// printed as a percentage; the table marker mirrors spreadsheet overflow.
inline std::string delta_cell(const Delta& d) {
  return d.infinite ? "######" : fixed(d.value, 2);
}

inline bool delta_negative(const Delta& d) { return !d.infinite && d.value < 0.0; }

inline std::vector<Strategy> strategies_in(const KnowledgeMap& map) {
  std::vector<Strategy> out;
  for (Strategy s : {Strategy::SW, Strategy::HSW, Strategy::GA})
    for (const auto& e : map.entries)
      if (e.strategy == s) {
        out.push_back(s);
        break;
      }
  return out;
}

inline std::vector<MetricKind> kinds_in(const KnowledgeMap& map) {
  std::vector<MetricKind> out;
  for (MetricKind k :
       {MetricKind::CR, MetricKind::CBA, MetricKind::OBA, MetricKind::OF1})
    for (const auto& e : map.entries)
      if (e.objective.kind == k) {
        out.push_back(k);
        break;
      }
  return out;
}

inline MetricId objective_for(MetricKind kind, const ClassId& cls) {
  if (metric_kind_is_overall(kind)) return {kind, {}};
  return {kind, cls};
}

}  // namespace detail

// One row per class; one column per (strategy, metric) pair holding that
// setting's improvement on its own objective. A trailing flag column marks
// rows containing any negative delta.
inline ReportTable delta_grid_table(const KnowledgeMap& map) {
  ReportTable t;
  t.title = "Improvement grid (delta % on own objective)";
  auto strategies = detail::strategies_in(map);
  auto kinds = detail::kinds_in(map);
  t.header.push_back("class");
  for (Strategy s : strategies)
    for (MetricKind k : kinds)
      t.header.push_back(std::string(strategy_name(s)) + " " + metric_kind_name(k));
  t.header.push_back("flags");

  for (const auto& cls : map.schema) {
    std::vector<std::string> row = {cls};
    bool negative = false;
    for (Strategy s : strategies) {
      for (MetricKind k : kinds) {
        Setting setting{s, k, cls};
        const MapEntry* e = map.find(setting.key());
        if (!e) {
          row.push_back("");
          continue;
        }
        Delta d = e->deltas.get(e->objective);
        negative = negative || detail::delta_negative(d);
        row.push_back(detail::delta_cell(d));
      }
    }
    row.push_back(negative ? "-" : "");
    t.rows.push_back(std::move(row));
  }
  return t;
}

// One row per class, one column per metric; each cell lists the strategies
// within the tie band of the best own-objective delta.
inline ReportTable best_summary_table(const KnowledgeMap& map, double band = 0.03) {
  ReportTable t;
  t.title = "Best strategies (ties within " + detail::fixed(band, 2) +
            " delta points)";
  BestSummary summary = summarize_best(map, band);
  auto kinds = detail::kinds_in(map);
  t.header.push_back("class");
  for (MetricKind k : kinds) t.header.push_back(metric_kind_name(k));

  for (const auto& cls : map.schema) {
    std::vector<std::string> row = {cls};
    for (MetricKind k : kinds) {
      auto it = summary.cells.find({detail::objective_for(k, cls), cls});
      std::string cell;
      if (it != summary.cells.end()) {
        // Canonical strategy order, not alphabetical.
        for (Strategy s : {Strategy::SW, Strategy::HSW, Strategy::GA}) {
          if (!it->second.count(strategy_name(s))) continue;
          if (!cell.empty()) cell += ", ";
          cell += strategy_name(s);
        }
      }
      row.push_back(cell);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// One table per (strategy, metric): each row is the full delta vector of
// one setting, showing side effects on every other class and metric. The
// last row restates the baseline's absolute scores.
inline std::vector<ReportTable> cross_impact_tables(const KnowledgeMap& map,
                                                    const ScoreVector& baseline) {
  std::vector<ReportTable> out;
  ScoreVector probe;
  probe.schema = map.schema;
  auto columns = probe.ids();

  for (Strategy s : detail::strategies_in(map)) {
    for (MetricKind k : detail::kinds_in(map)) {
      std::vector<const MapEntry*> entries;
      for (const auto& cls : map.schema) {
        Setting setting{s, k, cls};
        if (const MapEntry* e = map.find(setting.key())) entries.push_back(e);
      }
      if (entries.empty()) continue;

      ReportTable t;
      t.title = std::string("Cross-impact: ") + strategy_name(s) +
                " optimizing " + metric_kind_name(k);
      t.header.push_back("examples");
      for (const auto& id : columns) t.header.push_back("d" + id.key() + "%");
      t.header.push_back("flags");

      for (const auto* e : entries) {
        std::vector<std::string> row = {e->example_class};
        bool negative = false;
        for (const auto& id : columns) {
          Delta d = e->deltas.get(id);
          negative = negative || detail::delta_negative(d);
          row.push_back(detail::delta_cell(d));
        }
        row.push_back(negative ? "-" : "");
        t.rows.push_back(std::move(row));
      }

      std::vector<std::string> base_row = {"baseline"};
      for (const auto& id : columns)
        base_row.push_back(detail::fixed(baseline.get(id).value, 4));
      base_row.push_back("");
      t.rows.push_back(std::move(base_row));
      out.push_back(std::move(t));
    }
  }
  return out;
}

inline std::vector<ReportTable> build_report_tables(const KnowledgeMap& map,
                                                    const ScoreVector& baseline,
                                                    double band = 0.03) {
  std::vector<ReportTable> out;
  out.push_back(delta_grid_table(map));
  out.push_back(best_summary_table(map, band));
  for (auto& t : cross_impact_tables(map, baseline)) out.push_back(std::move(t));
  return out;
}

namespace detail {

inline std::string md_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else out += c;
  }
  return out;
}

}  // namespace detail

inline std::string table_to_markdown(const ReportTable& t) {
  std::string out = "## " + t.title + "\n\n|";
  for (const auto& h : t.header) out += " " + detail::md_escape(h) + " |";
  out += "\n|";
  for (size_t i = 0; i < t.header.size(); ++i) out += " --- |";
  out += "\n";
  for (const auto& row : t.rows) {
    out += "|";
    for (const auto& cell : row) out += " " + detail::md_escape(cell) + " |";
    out += "\n";
  }
  return out;
}

inline std::string table_to_tsv(const ReportTable& t) {
  std::string out = "# table: " + t.title + "\n";
  out += tsv_line(t.header) + "\n";
  for (const auto& row : t.rows) out += tsv_line(row) + "\n";
  return out;
}

inline std::string report_markdown(const std::vector<ReportTable>& tables,
                                   const std::string& heading) {
  std::string out = "# " + heading + "\n";
  for (const auto& t : tables) {
    out += "\n";
    out += table_to_markdown(t);
  }
  return out;
}

inline std::string report_tsv(const std::vector<ReportTable>& tables) {
  std::string out;
  for (const auto& t : tables) {
    if (!out.empty()) out += "\n";
    out += table_to_tsv(t);
  }
  return out;
}

}  // namespace autogets
