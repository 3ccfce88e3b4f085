#pragma once
// Independent reference implementations used to cross-check the library.
// Everything here is deliberately written as plain double loops and
// spelled-out arithmetic, sharing no code with the headers under test.

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

struct Cell {
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

using Pair = std::pair<std::string, std::string>;  // (truth label, predicted label)

inline std::map<std::string, Cell> confusion(const std::vector<Pair>& items,
                                             const std::vector<std::string>& classes) {
  std::map<std::string, Cell> out;
  for (const auto& c : classes) {
    Cell cell;
    for (const auto& it : items) {
      bool truth_is_c = (it.first == c);
      bool pred_is_c = (it.second == c);
      if (truth_is_c && pred_is_c) cell.tp += 1;
      if (!truth_is_c && pred_is_c) cell.fp += 1;
      if (truth_is_c && !pred_is_c) cell.fn += 1;
      if (!truth_is_c && !pred_is_c) cell.tn += 1;
    }
    out[c] = cell;
  }
  return out;
}

inline Cell pooled(const std::map<std::string, Cell>& per_class) {
  Cell p;
  for (const auto& kv : per_class) {
    p.tp += kv.second.tp;
    p.fp += kv.second.fp;
    p.tn += kv.second.tn;
    p.fn += kv.second.fn;
  }
  return p;
}

// Each returns NaN where a denominator is zero.
inline double recall(const Cell& c) {
  double den = double(c.tp) + double(c.fn);
  if (den == 0.0) return std::nan("");
  return double(c.tp) / den;
}

inline double cba_printed(const Cell& c) {
  double d1 = double(c.tp) + double(c.fp);
  double d2 = double(c.tn) + double(c.fn);
  if (d1 == 0.0 || d2 == 0.0) return std::nan("");
  return 0.5 * (double(c.tp) / d1 + double(c.tn) / d2);
}

inline double cba_standard(const Cell& c) {
  double d1 = double(c.tp) + double(c.fn);
  double d2 = double(c.tn) + double(c.fp);
  if (d1 == 0.0 || d2 == 0.0) return std::nan("");
  return 0.5 * (double(c.tp) / d1 + double(c.tn) / d2);
}

inline double of1(const Cell& p) {
  double den = 2.0 * double(p.tp) + double(p.fp) + double(p.fn);
  if (den == 0.0) return std::nan("");
  return 2.0 * double(p.tp) / den;
}

// Hand enumeration of the floor-then-remainder split counts.
struct SplitCounts {
  long train = 0, opt = 0, holdout = 0;
};

inline SplitCounts split_counts(long class_size, double r_opt, double r_holdout) {
  SplitCounts s;
  s.opt = static_cast<long>(std::floor(r_opt * double(class_size)));
  s.holdout = static_cast<long>(std::floor(r_holdout * double(class_size)));
  s.train = class_size - s.opt - s.holdout;
  return s;
}

}  // namespace oracle
