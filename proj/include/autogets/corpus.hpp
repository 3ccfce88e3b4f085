#pragma once
// Labeled message corpus: TSV loading, validation, and the seeded
// stratified three-way split (train / optimization test / holdout).

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "autogets/common.hpp"
#include "autogets/tsv.hpp"

namespace autogets {

using ClassId = std::string;

struct Message {
  std::string id;
  ClassId label;
  std::string text;
};

struct LabeledDataset {
  std::vector<Message> messages;
  std::vector<ClassId> schema;  // lexicographically sorted, no duplicates

  size_t size() const { return messages.size(); }
  bool empty() const { return messages.empty(); }

  bool has_class(const ClassId& c) const {
    return std::binary_search(schema.begin(), schema.end(), c);
  }

  std::map<ClassId, size_t> class_sizes() const {
    std::map<ClassId, size_t> out;
    for (const auto& c : schema) out[c] = 0;
    for (const auto& m : messages) ++out[m.label];
    return out;
  }

  const Message* find(const std::string& id) const {
    for (const auto& m : messages)
      if (m.id == id) return &m;
    return nullptr;
  }
};

inline std::vector<ClassId> collect_schema(const std::vector<Message>& messages) {
  std::set<ClassId> labels;
  for (const auto& m : messages) labels.insert(m.label);
  return std::vector<ClassId>(labels.begin(), labels.end());
}

// Full-corpus validation; split partitions are allowed to be smaller (an
// empty partition or an absent class is legal there).
inline void validate_dataset(const LabeledDataset& ds) {
  if (ds.messages.empty()) throw ParseError("no records");
  if (ds.schema.size() < 2)
    throw ParseError("dataset must contain at least 2 classes, found " +
                     std::to_string(ds.schema.size()));
  std::set<std::string> seen;
  for (const auto& m : ds.messages) {
    if (m.id.empty()) throw ParseError("empty message id");
    if (!seen.insert(m.id).second)
      throw ParseError("duplicate id '" + m.id + "'");
    if (!ds.has_class(m.label))
      throw ParseError("label '" + m.label + "' missing from schema");
  }
}

inline const char* kDatasetHeader[] = {"id", "label", "text"};

inline LabeledDataset parse_dataset(std::string_view text) {
  auto rows = parse_tsv(text);
  if (rows.empty()) throw ParseError("no records");
  const auto& head = rows.front();
  if (head.fields.size() != 3 || head.fields[0] != "id" ||
      head.fields[1] != "label" || head.fields[2] != "text")
    throw ParseError("parse error line " + std::to_string(head.line_no) +
                     ": expected header 'id<TAB>label<TAB>text'");
  if (rows.size() == 1) throw ParseError("no records");

  LabeledDataset ds;
  std::set<std::string> seen;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 3)
      throw ParseError("parse error line " + std::to_string(row.line_no) +
                       ": expected 3 fields, found " +
                       std::to_string(row.fields.size()));
    Message m{row.fields[0], row.fields[1], row.fields[2]};
    if (m.id.empty())
      throw ParseError("parse error line " + std::to_string(row.line_no) +
                       ": empty id");
    if (m.label.empty())
      throw ParseError("parse error line " + std::to_string(row.line_no) +
                       ": empty label");
    if (!seen.insert(m.id).second)
      throw ParseError("duplicate id '" + m.id + "' at line " +
                       std::to_string(row.line_no));
    ds.messages.push_back(std::move(m));
  }
  ds.schema = collect_schema(ds.messages);
  if (ds.schema.size() < 2)
    throw ParseError("dataset must contain at least 2 classes, found " +
                     std::to_string(ds.schema.size()));
  return ds;
}

inline LabeledDataset load_dataset(const std::string& path) {
  return parse_dataset(read_file(path));
}

inline std::string serialize_dataset(const LabeledDataset& ds) {
  std::string out = "id\tlabel\ttext\n";
  for (const auto& m : ds.messages) out += tsv_line({m.id, m.label, m.text});
  return out;
}

inline void save_dataset(const LabeledDataset& ds, const std::string& path) {
  write_file(path, serialize_dataset(ds));
}

struct SplitRatios {
  double train = 0.6;
  double opt = 0.2;
  double holdout = 0.2;
};

struct Split {
  LabeledDataset train;
  LabeledDataset opt_test;
  LabeledDataset holdout;
};

// Per class: floor(opt_ratio*n) and floor(holdout_ratio*n) messages go to
// the optimization and holdout partitions, the remainder to train. Message
// order within partitions follows the input dataset order; all partitions
// keep the full parent schema.
inline Split stratified_split(const LabeledDataset& ds, const SplitRatios& r,
                              uint64_t seed) {
  if (r.train < 0 || r.opt < 0 || r.holdout < 0)
    throw ConfigError("split ratios must be non-negative");
  double sum = r.train + r.opt + r.holdout;
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1, got " + fmt_double(sum));

  bool all_three = r.train > 0 && r.opt > 0 && r.holdout > 0;
  auto sizes = ds.class_sizes();
  if (all_three) {
    for (const auto& [cls, n] : sizes)
      if (n < 3)
        throw ConfigError("class '" + cls + "' has only " + std::to_string(n) +
                          " messages; need at least 3 for a three-way split");
  }

  // 0 = train, 1 = opt, 2 = holdout
  std::map<std::string, int> assignment;
  for (const auto& cls : ds.schema) {
    std::vector<size_t> members;
    for (size_t i = 0; i < ds.messages.size(); ++i)
      if (ds.messages[i].label == cls) members.push_back(i);
    Rng rng(derive_seed(seed, "split:" + cls));
    rng.shuffle(members);
    size_t n = members.size();
    size_t n_opt = static_cast<size_t>(std::floor(r.opt * static_cast<double>(n)));
    size_t n_hold = static_cast<size_t>(std::floor(r.holdout * static_cast<double>(n)));
    // Flooring remainders always land in train.
    for (size_t k = 0; k < n; ++k) {
      int part = 0;
      if (k < n_opt)
        part = 1;
      else if (k < n_opt + n_hold)
        part = 2;
      assignment[ds.messages[members[k]].id] = part;
    }
  }

  Split split;
  split.train.schema = ds.schema;
  split.opt_test.schema = ds.schema;
  split.holdout.schema = ds.schema;
  for (const auto& m : ds.messages) {
    switch (assignment.at(m.id)) {
      case 0: split.train.messages.push_back(m); break;
      case 1: split.opt_test.messages.push_back(m); break;
      default: split.holdout.messages.push_back(m); break;
    }
  }
  return split;
}

// Content hash used to detect a knowledge map built from different data.
inline uint64_t dataset_hash(const LabeledDataset& ds) {
  uint64_t h = kFnvOffset;
  for (const auto& m : ds.messages) {
    h = fnv1a(m.id, h);
    h = fnv1a("\x1f", h);
    h = fnv1a(m.label, h);
    h = fnv1a("\x1f", h);
    h = fnv1a(m.text, h);
    h = fnv1a("\x1e", h);
  }
  return h;
}

}  // namespace autogets
