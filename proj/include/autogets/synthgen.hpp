#pragma once
// Synthetic-text generation: the example-set abstraction, prompt
// construction, a deterministic mock backend, and a local EDA backend
// (synonym replacement, random insertion, random swap, random deletion
// over a user-supplied synonym table). The remote LLM backend lives in
// llm_client.hpp so its HTTP dependency stays out of offline builds.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "autogets/common.hpp"
#include "autogets/corpus.hpp"
#include "autogets/tsv.hpp"

namespace autogets {

// E_j: a chosen subset of same-class train messages.
struct ExampleSet {
  ClassId cls;
  std::vector<std::string> message_ids;  // sorted, unique, non-empty

  void canonicalize() {
    std::sort(message_ids.begin(), message_ids.end());
    message_ids.erase(std::unique(message_ids.begin(), message_ids.end()),
                      message_ids.end());
  }
};

struct SyntheticBatch {
  std::string batch_id;
  ClassId cls;
  std::vector<std::string> texts;
  std::string generator;
  ExampleSet source;

  std::vector<Message> messages() const {
    std::vector<Message> out;
    for (size_t i = 0; i < texts.size(); ++i)
      out.push_back({batch_id + "#" + std::to_string(i), cls, texts[i]});
    return out;
  }
};

struct LlmParams {
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.7;
  long max_tokens = 550;
  double top_p = 0.5;
  double frequency_penalty = 0.3;
  double presence_penalty = 0.0;

  void validate() const {
    if (temperature < 0) throw ConfigError("temperature must be >= 0");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (top_p <= 0 || top_p > 1) throw ConfigError("top_p must be in (0,1]");
  }
};

struct EdaParams {
  double alpha_sr = 0.1;
  double alpha_ri = 0.1;
  double alpha_rs = 0.1;
  double alpha_rd = 0.1;
  int n_aug = 4;
  std::string synonym_table;  // TSV path; empty means no table

  void validate() const {
    for (double a : {alpha_sr, alpha_ri, alpha_rs, alpha_rd})
      if (a < 0 || a > 1) throw ConfigError("EDA alphas must be in [0,1]");
    if (n_aug < 1) throw ConfigError("EDA n_aug must be >= 1");
  }
};

class SynonymTable {
 public:
  SynonymTable() = default;

  static SynonymTable parse(std::string_view text) {
    SynonymTable t;
    for (const auto& row : parse_tsv(text, /*skip_comments=*/true)) {
      if (row.fields.size() != 2)
        throw ParseError("synonym table line " + std::to_string(row.line_no) +
                         ": expected word<TAB>synonym");
      t.map_[row.fields[0]].push_back(row.fields[1]);
    }
    return t;
  }

  static SynonymTable load(const std::string& path) {
    return parse(read_file(path));
  }

  bool empty() const { return map_.empty(); }

  const std::vector<std::string>* find(const std::string& word) const {
    auto it = map_.find(word);
    return it == map_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, std::vector<std::string>> map_;
};

namespace detail {

// One EDA variant. Counts for replacement/insertion/swap derive from the
// original token count; deletion is a per-token coin with a keep-one floor.
inline std::string eda_variant(const std::vector<std::string>& original,
                               const EdaParams& p, const SynonymTable& table,
                               Rng& rng, std::vector<std::string>& warnings) {
  std::vector<std::string> tokens = original;
  size_t len = original.size();
  auto n_ops = [&](double alpha) {
    return static_cast<size_t>(std::ceil(alpha * static_cast<double>(len)));
  };

  if (p.alpha_sr > 0) {
    std::vector<size_t> candidates;
    for (size_t i = 0; i < tokens.size(); ++i)
      if (table.find(tokens[i])) candidates.push_back(i);
    if (candidates.empty()) {
      warnings.push_back("synonym replacement skipped: no replaceable tokens");
    } else {
      rng.shuffle(candidates);
      size_t n = std::min(n_ops(p.alpha_sr), candidates.size());
      for (size_t k = 0; k < n; ++k) {
        const auto& syns = *table.find(tokens[candidates[k]]);
        tokens[candidates[k]] = syns[rng.index(syns.size())];
      }
    }
  }

  if (p.alpha_ri > 0) {
    if (table.empty()) {
      warnings.push_back("random insertion skipped: empty synonym table");
    } else {
      size_t n = n_ops(p.alpha_ri);
      for (size_t k = 0; k < n; ++k) {
        const std::vector<std::string>* syns = nullptr;
        for (int tries = 0; tries < 32 && !syns; ++tries)
          syns = table.find(original[rng.index(original.size())]);
        if (!syns) {
          warnings.push_back("random insertion skipped: no insertable tokens");
          break;
        }
        size_t pos = rng.index(tokens.size() + 1);
        tokens.insert(tokens.begin() + static_cast<long>(pos),
                      (*syns)[rng.index(syns->size())]);
      }
    }
  }

  if (p.alpha_rs > 0 && tokens.size() >= 2) {
    size_t n = n_ops(p.alpha_rs);
    for (size_t k = 0; k < n; ++k) {
      size_t i = rng.index(tokens.size());
      size_t j = rng.index(tokens.size() - 1);
      if (j >= i) ++j;
      std::swap(tokens[i], tokens[j]);
    }
  }

  if (p.alpha_rd > 0) {
    std::vector<std::string> kept;
    for (const auto& t : tokens)
      if (!rng.chance(p.alpha_rd)) kept.push_back(t);
    if (kept.empty()) kept.push_back(tokens[rng.index(tokens.size())]);
    tokens = std::move(kept);
  }

  return join(tokens, " ");
}

}  // namespace detail

inline std::vector<std::string> eda_augment(const std::string& text,
                                            const EdaParams& params,
                                            const SynonymTable& table,
                                            uint64_t seed,
                                            std::vector<std::string>* warnings = nullptr) {
  params.validate();
  auto tokens = split_ws(text);
  if (tokens.empty())
    throw std::invalid_argument("eda_augment: text has no tokens");
  std::vector<std::string> local_warnings;
  std::vector<std::string> out;
  for (int v = 0; v < params.n_aug; ++v) {
    Rng rng(derive_seed(seed, static_cast<uint64_t>(v)));
    out.push_back(detail::eda_variant(tokens, params, table, rng, local_warnings));
  }
  if (warnings)
    for (auto& w : local_warnings) warnings->push_back(std::move(w));
  return out;
}

inline constexpr const char* kDefaultPromptTemplate =
    "You write short text messages for a classification dataset.\n"
    "Class: {class}\n"
    "Write {count} new messages that belong to this class, one message per "
    "paragraph, separated by blank lines.\n"
    "Follow the style of these examples:\n"
    "{numbered_examples}\n";

// {examples} renders example texts one per line in id order;
// {numbered_examples} prefixes each with "1. ", "2. ", ...
inline std::string build_prompt(const ClassId& cls,
                                const std::vector<std::string>& example_texts,
                                long count, const std::string& tmpl) {
  if (tmpl.empty()) throw ConfigError("prompt template is empty");
  bool has_examples = tmpl.find("{examples}") != std::string::npos ||
                      tmpl.find("{numbered_examples}") != std::string::npos;
  if (!has_examples || tmpl.find("{count}") == std::string::npos)
    throw ConfigError(
        "prompt template must contain {count} and {examples} or "
        "{numbered_examples}");

  std::string plain = join(example_texts, "\n");
  std::string numbered;
  for (size_t i = 0; i < example_texts.size(); ++i) {
    if (i) numbered += "\n";
    numbered += std::to_string(i + 1) + ". " + example_texts[i];
  }

  auto replace_all = [](std::string s, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
    return s;
  };
  std::string out = replace_all(tmpl, "{class}", cls);
  out = replace_all(out, "{count}", std::to_string(count));
  out = replace_all(out, "{numbered_examples}", numbered);
  out = replace_all(out, "{examples}", plain);
  return out;
}

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string id() const = 0;
  virtual std::vector<std::string> produce(const ClassId& cls,
                                           const std::vector<std::string>& example_texts,
                                           long count, uint64_t seed,
                                           std::vector<std::string>& warnings) = 0;
};

// Round-robins the example texts, tagging each emission; "[syn k]" is
// 1-based over the batch. The empty variant emits nothing, which makes a
// whole optimization run a provable no-op.
class MockGenerator : public Generator {
 public:
  explicit MockGenerator(bool empty_batches = false) : empty_(empty_batches) {}

  std::string id() const override { return empty_ ? "mock-empty" : "mock"; }

  std::vector<std::string> produce(const ClassId&,
                                   const std::vector<std::string>& example_texts,
                                   long count, uint64_t,
                                   std::vector<std::string>&) override {
    std::vector<std::string> out;
    if (empty_) return out;
    for (long k = 0; k < count; ++k)
      out.push_back(example_texts[static_cast<size_t>(k) % example_texts.size()] +
                    " [syn " + std::to_string(k + 1) + "]");
    return out;
  }

 private:
  bool empty_;
};

class EdaGenerator : public Generator {
 public:
  EdaGenerator(EdaParams params, SynonymTable table)
      : params_(std::move(params)), table_(std::move(table)) {
    params_.validate();
  }

  std::string id() const override { return "eda"; }

  std::vector<std::string> produce(const ClassId&,
                                   const std::vector<std::string>& example_texts,
                                   long count, uint64_t seed,
                                   std::vector<std::string>& warnings) override {
    std::vector<std::string> out;
    EdaParams one = params_;
    one.n_aug = 1;
    for (long k = 0; k < count; ++k) {
      const auto& text = example_texts[static_cast<size_t>(k) % example_texts.size()];
      auto variants = eda_augment(text, one, table_,
                                  derive_seed(seed, static_cast<uint64_t>(k)),
                                  &warnings);
      out.push_back(variants.front());
    }
    return out;
  }

 private:
  EdaParams params_;
  SynonymTable table_;
};

// Resolves example ids against the train partition (id order), runs the
// backend, and wraps the result with a deterministic batch id.
inline SyntheticBatch generate(Generator& backend, const LabeledDataset& train,
                               const ExampleSet& examples, long count,
                               uint64_t seed,
                               std::vector<std::string>* warnings = nullptr) {
  if (count < 1) throw std::invalid_argument("generate: count must be >= 1");
  if (examples.message_ids.empty())
    throw std::invalid_argument("generate: empty example set");

  std::vector<std::string> texts;
  for (const auto& id : examples.message_ids) {
    const Message* m = train.find(id);
    if (!m)
      throw std::runtime_error("example id '" + id + "' not in train partition");
    if (m->label != examples.cls)
      throw std::runtime_error("example id '" + id + "' is labeled '" + m->label +
                               "', not '" + examples.cls + "'");
    texts.push_back(m->text);
  }

  uint64_t tag = kFnvOffset;
  tag = fnv1a(backend.id(), tag);
  tag = fnv1a(examples.cls, tag);
  for (const auto& id : examples.message_ids) tag = fnv1a(id, tag);
  tag = fnv1a_u64(seed, tag);

  SyntheticBatch batch;
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(mix64(tag)));
  batch.batch_id = std::string("batch-") + hex;
  batch.cls = examples.cls;
  batch.generator = backend.id();
  batch.source = examples;
  std::vector<std::string> local;
  batch.texts = backend.produce(examples.cls, texts, count, seed,
                                warnings ? *warnings : local);
  return batch;
}

}  // namespace autogets
