#pragma once
// Run configuration: a flat `key = value` text format shared by config
// files and run manifests. One registry drives parsing, serialization,
// and the config hash, so the three can never drift apart. Flags given
// on the command line are applied as overrides after the file.

#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "autogets/classifier.hpp"
#include "autogets/common.hpp"
#include "autogets/corpus.hpp"
#include "autogets/features.hpp"
#include "autogets/metrics.hpp"
#include "autogets/search.hpp"
#include "autogets/synthgen.hpp"

namespace autogets {

struct RunConfig {
  // io (excluded from the config hash: moving files or changing
  // parallelism does not alter results)
  std::string dataset;
  std::string out = "run";
  int jobs = 0;  // 0 -> logical CPU count at use time
  std::string command;  // informational: which subcommand wrote the manifest

  uint64_t seed = 1;  // master seed; all randomness derives from it

  SplitRatios ratios;
  EmbeddingConfig embedding;

  std::string trainer = "reference";
  std::map<std::string, std::string> hyper;  // model.hyper.* passthrough

  std::string backend = "mock";  // mock | mock-empty | eda | llm
  GenVolume gen;
  EdaParams eda;
  LlmParams llm;
  double llm_timeout_s = 30.0;
  int llm_max_retries = 3;
  int llm_max_inflight = 4;

  SwParams sw;
  HswParams hsw;
  GaParams ga;

  std::string projection_mode = "consecutive";
  int projection_k = 0;  // top_variance only

  long budget = 8;  // attempts per sweep setting
  std::optional<double> wall_clock_limit_s;
  std::vector<std::string> strategies;  // empty -> all
  std::vector<std::string> metrics;     // empty -> all
  std::vector<std::string> classes;     // empty -> full schema

  int phases = 3;
  long phase_budget = 12;
  int top_k = 3;
  std::string objectives;  // objectives file path (improve)

  double band = 0.03;
  std::string cba_variant = "printed";  // printed | standard

  ModelSpec model_spec() const { return {trainer, hyper}; }

  int effective_jobs() const {
    if (jobs > 0) return jobs;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }

  void validate() const {
    if (ratios.train < 0 || ratios.opt < 0 || ratios.holdout < 0)
      throw ConfigError("split ratios must be >= 0");
    if (ratios.train <= 0) throw ConfigError("split.train must be > 0");
    if (ratios.train + ratios.opt + ratios.holdout > 1.0 + 1e-9)
      throw ConfigError("split ratios must sum to at most 1");
    if (embedding.dims < 2) throw ConfigError("embed.dims must be >= 2");
    if (embedding.buckets < 1) throw ConfigError("embed.buckets must be >= 1");
    if (backend != "mock" && backend != "mock-empty" && backend != "eda" &&
        backend != "llm")
      throw ConfigError("gen.backend must be mock, mock-empty, eda, or llm");
    if (gen.per_example < 1) throw ConfigError("gen.per_example must be >= 1");
    if (gen.cap < 1) throw ConfigError("gen.cap must be >= 1");
    eda.validate();
    llm.validate();
    sw.validate();
    hsw.validate();
    ga.validate();
    parse_projection_mode(projection_mode);
    Budget{budget, wall_clock_limit_s}.validate();
    for (const auto& s : strategies) parse_strategy(s);
    for (const auto& m : metrics) parse_metric_kind(m);
    if (phases < 1) throw ConfigError("improve.phases must be >= 1");
    if (phase_budget < 1) throw ConfigError("improve.phase_budget must be >= 1");
    if (top_k < 1) throw ConfigError("improve.k must be >= 1");
    if (band < 0) throw ConfigError("report.band must be >= 0");
    if (jobs < 0) throw ConfigError("jobs must be >= 0");
    if (cba_variant != "printed" && cba_variant != "standard")
      throw ConfigError("metrics.cba must be printed or standard");
  }

  CbaVariant cba() const {
    return cba_variant == "standard" ? CbaVariant::standard
                                     : CbaVariant::printed;
  }
};

namespace detail {

struct ConfigKey {
  const char* key;
  bool hashed;  // participates in the config hash
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline std::string join_list(const std::vector<std::string>& v) {
  return join(v, ",");
}

inline std::vector<std::string> parse_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& piece : split_char(s, ',')) {
    auto t = trim(piece);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

inline std::string opt_double_str(const std::optional<double>& v) {
  return v ? fmt_double(*v) : "none";
}

inline std::optional<double> parse_opt_double(const std::string& s,
                                              const char* what) {
  if (s == "none" || s.empty()) return std::nullopt;
  return parse_double(s, what);
}

inline const std::vector<ConfigKey>& config_registry() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto add = [&](const char* key, bool hashed,
                   std::function<std::string(const RunConfig&)> get,
                   std::function<void(RunConfig&, const std::string&)> set) {
      k.push_back({key, hashed, std::move(get), std::move(set)});
    };
    auto num = [&](const char* key, bool hashed, auto member) {
      add(key, hashed,
          [member](const RunConfig& c) { return fmt_double(c.*member); },
          [member, key](RunConfig& c, const std::string& v) {
            c.*member = parse_double(v, key);
          });
    };
    auto integer = [&](const char* key, bool hashed, auto member) {
      add(key, hashed,
          [member](const RunConfig& c) {
            return std::to_string(c.*member);
          },
          [member, key](RunConfig& c, const std::string& v) {
            c.*member = static_cast<std::remove_reference_t<
                decltype(std::declval<RunConfig&>().*member)>>(
                parse_long(v, key));
          });
    };
    auto text = [&](const char* key, bool hashed, auto member) {
      add(key, hashed,
          [member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, const std::string& v) { c.*member = v; });
    };

    text("command", false, &RunConfig::command);
    text("dataset", false, &RunConfig::dataset);
    text("out", false, &RunConfig::out);
    integer("jobs", false, &RunConfig::jobs);
    add("seed", true,
        [](const RunConfig& c) { return std::to_string(c.seed); },
        [](RunConfig& c, const std::string& v) {
          c.seed = static_cast<uint64_t>(parse_long(v, "seed"));
        });

    add("split.train", true,
        [](const RunConfig& c) { return fmt_double(c.ratios.train); },
        [](RunConfig& c, const std::string& v) {
          c.ratios.train = parse_double(v, "split.train");
        });
    add("split.opt", true,
        [](const RunConfig& c) { return fmt_double(c.ratios.opt); },
        [](RunConfig& c, const std::string& v) {
          c.ratios.opt = parse_double(v, "split.opt");
        });
    add("split.holdout", true,
        [](const RunConfig& c) { return fmt_double(c.ratios.holdout); },
        [](RunConfig& c, const std::string& v) {
          c.ratios.holdout = parse_double(v, "split.holdout");
        });

    add("embed.dims", true,
        [](const RunConfig& c) { return std::to_string(c.embedding.dims); },
        [](RunConfig& c, const std::string& v) {
          c.embedding.dims = static_cast<int>(parse_long(v, "embed.dims"));
        });
    add("embed.buckets", true,
        [](const RunConfig& c) { return std::to_string(c.embedding.buckets); },
        [](RunConfig& c, const std::string& v) {
          c.embedding.buckets =
              static_cast<int>(parse_long(v, "embed.buckets"));
        });
    add("embed.hash_seed", true,
        [](const RunConfig& c) {
          return std::to_string(c.embedding.hash_seed);
        },
        [](RunConfig& c, const std::string& v) {
          c.embedding.hash_seed =
              static_cast<uint64_t>(parse_long(v, "embed.hash_seed"));
        });

    text("model.trainer", true, &RunConfig::trainer);

    text("gen.backend", true, &RunConfig::backend);
    add("gen.per_example", true,
        [](const RunConfig& c) { return std::to_string(c.gen.per_example); },
        [](RunConfig& c, const std::string& v) {
          c.gen.per_example = parse_long(v, "gen.per_example");
        });
    add("gen.cap", true,
        [](const RunConfig& c) { return std::to_string(c.gen.cap); },
        [](RunConfig& c, const std::string& v) {
          c.gen.cap = parse_long(v, "gen.cap");
        });

    add("eda.alpha_sr", true,
        [](const RunConfig& c) { return fmt_double(c.eda.alpha_sr); },
        [](RunConfig& c, const std::string& v) {
          c.eda.alpha_sr = parse_double(v, "eda.alpha_sr");
        });
    add("eda.alpha_ri", true,
        [](const RunConfig& c) { return fmt_double(c.eda.alpha_ri); },
        [](RunConfig& c, const std::string& v) {
          c.eda.alpha_ri = parse_double(v, "eda.alpha_ri");
        });
    add("eda.alpha_rs", true,
        [](const RunConfig& c) { return fmt_double(c.eda.alpha_rs); },
        [](RunConfig& c, const std::string& v) {
          c.eda.alpha_rs = parse_double(v, "eda.alpha_rs");
        });
    add("eda.alpha_rd", true,
        [](const RunConfig& c) { return fmt_double(c.eda.alpha_rd); },
        [](RunConfig& c, const std::string& v) {
          c.eda.alpha_rd = parse_double(v, "eda.alpha_rd");
        });
    add("eda.n_aug", true,
        [](const RunConfig& c) { return std::to_string(c.eda.n_aug); },
        [](RunConfig& c, const std::string& v) {
          c.eda.n_aug = static_cast<int>(parse_long(v, "eda.n_aug"));
        });
    add("eda.synonyms", true,
        [](const RunConfig& c) { return c.eda.synonym_table; },
        [](RunConfig& c, const std::string& v) { c.eda.synonym_table = v; });

    add("llm.model", true,
        [](const RunConfig& c) { return c.llm.model; },
        [](RunConfig& c, const std::string& v) { c.llm.model = v; });
    add("llm.temperature", true,
        [](const RunConfig& c) { return fmt_double(c.llm.temperature); },
        [](RunConfig& c, const std::string& v) {
          c.llm.temperature = parse_double(v, "llm.temperature");
        });
    add("llm.max_tokens", true,
        [](const RunConfig& c) { return std::to_string(c.llm.max_tokens); },
        [](RunConfig& c, const std::string& v) {
          c.llm.max_tokens = parse_long(v, "llm.max_tokens");
        });
    add("llm.top_p", true,
        [](const RunConfig& c) { return fmt_double(c.llm.top_p); },
        [](RunConfig& c, const std::string& v) {
          c.llm.top_p = parse_double(v, "llm.top_p");
        });
    add("llm.frequency_penalty", true,
        [](const RunConfig& c) { return fmt_double(c.llm.frequency_penalty); },
        [](RunConfig& c, const std::string& v) {
          c.llm.frequency_penalty = parse_double(v, "llm.frequency_penalty");
        });
    add("llm.presence_penalty", true,
        [](const RunConfig& c) { return fmt_double(c.llm.presence_penalty); },
        [](RunConfig& c, const std::string& v) {
          c.llm.presence_penalty = parse_double(v, "llm.presence_penalty");
        });
    num("llm.timeout_s", false, &RunConfig::llm_timeout_s);
    integer("llm.max_retries", false, &RunConfig::llm_max_retries);
    integer("llm.max_inflight", false, &RunConfig::llm_max_inflight);

    add("sw.window_size", true,
        [](const RunConfig& c) { return fmt_double(c.sw.window_size); },
        [](RunConfig& c, const std::string& v) {
          c.sw.window_size = parse_double(v, "sw.window_size");
        });
    add("sw.stride", true,
        [](const RunConfig& c) { return fmt_double(c.sw.stride); },
        [](RunConfig& c, const std::string& v) {
          c.sw.stride = parse_double(v, "sw.stride");
        });
    add("sw.k", true,
        [](const RunConfig& c) { return std::to_string(c.sw.k); },
        [](RunConfig& c, const std::string& v) {
          c.sw.k = static_cast<int>(parse_long(v, "sw.k"));
        });
    add("sw.attempts_per_window", true,
        [](const RunConfig& c) {
          return std::to_string(c.sw.attempts_per_window);
        },
        [](RunConfig& c, const std::string& v) {
          c.sw.attempts_per_window =
              static_cast<int>(parse_long(v, "sw.attempts_per_window"));
        });

    add("hsw.window_size", true,
        [](const RunConfig& c) { return fmt_double(c.hsw.window_size); },
        [](RunConfig& c, const std::string& v) {
          c.hsw.window_size = parse_double(v, "hsw.window_size");
        });
    add("hsw.stride", true,
        [](const RunConfig& c) { return fmt_double(c.hsw.stride); },
        [](RunConfig& c, const std::string& v) {
          c.hsw.stride = parse_double(v, "hsw.stride");
        });
    add("hsw.k", true,
        [](const RunConfig& c) { return std::to_string(c.hsw.k); },
        [](RunConfig& c, const std::string& v) {
          c.hsw.k = static_cast<int>(parse_long(v, "hsw.k"));
        });
    add("hsw.attempts_per_window", true,
        [](const RunConfig& c) {
          return std::to_string(c.hsw.attempts_per_window);
        },
        [](RunConfig& c, const std::string& v) {
          c.hsw.attempts_per_window =
              static_cast<int>(parse_long(v, "hsw.attempts_per_window"));
        });
    add("hsw.max_depth", true,
        [](const RunConfig& c) { return std::to_string(c.hsw.max_depth); },
        [](RunConfig& c, const std::string& v) {
          c.hsw.max_depth = static_cast<int>(parse_long(v, "hsw.max_depth"));
        });

    add("ga.population", true,
        [](const RunConfig& c) { return std::to_string(c.ga.population); },
        [](RunConfig& c, const std::string& v) {
          c.ga.population = static_cast<int>(parse_long(v, "ga.population"));
        });
    add("ga.k_max", true,
        [](const RunConfig& c) { return std::to_string(c.ga.k_max); },
        [](RunConfig& c, const std::string& v) {
          c.ga.k_max = static_cast<int>(parse_long(v, "ga.k_max"));
        });
    add("ga.crossover_rate", true,
        [](const RunConfig& c) { return fmt_double(c.ga.crossover_rate); },
        [](RunConfig& c, const std::string& v) {
          c.ga.crossover_rate = parse_double(v, "ga.crossover_rate");
        });
    add("ga.mutation_rate", true,
        [](const RunConfig& c) {
          return c.ga.mutation_rate ? fmt_double(*c.ga.mutation_rate)
                                    : std::string("auto");
        },
        [](RunConfig& c, const std::string& v) {
          if (v == "auto" || v.empty())
            c.ga.mutation_rate = std::nullopt;
          else
            c.ga.mutation_rate = parse_double(v, "ga.mutation_rate");
        });
    add("ga.tournament", true,
        [](const RunConfig& c) { return std::to_string(c.ga.tournament); },
        [](RunConfig& c, const std::string& v) {
          c.ga.tournament = static_cast<int>(parse_long(v, "ga.tournament"));
        });
    add("ga.repair_retries", true,
        [](const RunConfig& c) {
          return std::to_string(c.ga.repair_retries);
        },
        [](RunConfig& c, const std::string& v) {
          c.ga.repair_retries =
              static_cast<int>(parse_long(v, "ga.repair_retries"));
        });

    text("proj.mode", true, &RunConfig::projection_mode);
    integer("proj.k", true, &RunConfig::projection_k);

    integer("budget", true, &RunConfig::budget);
    add("wall_clock_limit_s", false,
        [](const RunConfig& c) { return opt_double_str(c.wall_clock_limit_s); },
        [](RunConfig& c, const std::string& v) {
          c.wall_clock_limit_s = parse_opt_double(v, "wall_clock_limit_s");
        });
    add("sweep.strategies", true,
        [](const RunConfig& c) { return join_list(c.strategies); },
        [](RunConfig& c, const std::string& v) {
          c.strategies = parse_list(v);
        });
    add("sweep.metrics", true,
        [](const RunConfig& c) { return join_list(c.metrics); },
        [](RunConfig& c, const std::string& v) { c.metrics = parse_list(v); });
    add("sweep.classes", true,
        [](const RunConfig& c) { return join_list(c.classes); },
        [](RunConfig& c, const std::string& v) { c.classes = parse_list(v); });

    integer("improve.phases", true, &RunConfig::phases);
    integer("improve.phase_budget", true, &RunConfig::phase_budget);
    integer("improve.k", true, &RunConfig::top_k);
    text("improve.objectives", true, &RunConfig::objectives);

    num("report.band", true, &RunConfig::band);
    text("metrics.cba", true, &RunConfig::cba_variant);
    return k;
  }();
  return keys;
}

inline void set_config_key(RunConfig& cfg, const std::string& key,
                           const std::string& value) {
  for (const auto& entry : config_registry()) {
    if (key == entry.key) {
      entry.set(cfg, value);
      return;
    }
  }
  if (key.rfind("model.hyper.", 0) == 0) {
    cfg.hyper[key.substr(12)] = value;
    return;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text,
                              RunConfig base = RunConfig{}) {
  long line_no = 0;
  for (const auto& raw : split_char(text, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    try {
      detail::set_config_key(base, key, value);
    } catch (const std::exception& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::string& path,
                             RunConfig base = RunConfig{}) {
  return parse_config(read_file(path), std::move(base));
}

// The manifest is itself a valid config file: rerunning a command with
// `--config <out>/manifest` reproduces the run.
inline std::string serialize_config(const RunConfig& cfg) {
  std::string out = "# autogets run manifest\n";
  for (const auto& entry : detail::config_registry())
    out += std::string(entry.key) + " = " + entry.get(cfg) + "\n";
  for (const auto& [key, value] : cfg.hyper)
    out += "model.hyper." + key + " = " + value + "\n";
  return out;
}

// Fingerprint of the result-affecting configuration (file locations and
// parallelism excluded), recorded in knowledge-map provenance.
inline std::string config_hash(const RunConfig& cfg) {
  std::string material;
  for (const auto& entry : detail::config_registry())
    if (entry.hashed)
      material += std::string(entry.key) + " = " + entry.get(cfg) + "\n";
  for (const auto& [key, value] : cfg.hyper)
    material += "model.hyper." + key + " = " + value + "\n";
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(material)));
  return std::string(buf);
}

}  // namespace autogets
