#pragma once
// Command-line surface: `ingest`, `baseline`, `sweep`, `report`,
// `improve`, and `dump-projection` subcommands over one `key = value`
// configuration. Every run writes a manifest into its output directory;
// rerunning a command with `--config <out>/manifest` reproduces it.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "autogets/classifier.hpp"
#include "autogets/common.hpp"
#include "autogets/config.hpp"
#include "autogets/corpus.hpp"
#include "autogets/ensemble.hpp"
#include "autogets/features.hpp"
#include "autogets/knowledge.hpp"
#include "autogets/llm_client.hpp"
#include "autogets/metrics.hpp"
#include "autogets/report.hpp"
#include "autogets/search.hpp"
#include "autogets/synthgen.hpp"
#include "autogets/tsv.hpp"

namespace autogets::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Attempt-record JSON: the sweep's resumable manifest (one line per
// completed setting). Doubles round-trip exactly, so a resumed run's
// outputs are byte-identical to an uninterrupted one.

inline nlohmann::json scores_to_json(const ScoreVector& sv) {
  auto mv = [](const MetricValue& m) {
    return nlohmann::json::array({m.value, m.defined});
  };
  nlohmann::json cr = nlohmann::json::array();
  nlohmann::json cba = nlohmann::json::array();
  for (const auto& v : sv.cr) cr.push_back(mv(v));
  for (const auto& v : sv.cba) cba.push_back(mv(v));
  return {{"schema", sv.schema}, {"cr", cr},           {"cba", cba},
          {"oba", mv(sv.oba)},   {"of1", mv(sv.of1)}};
}

inline ScoreVector scores_from_json(const nlohmann::json& j) {
  auto mv = [](const nlohmann::json& v) {
    return MetricValue{v.at(0).get<double>(), v.at(1).get<bool>()};
  };
  ScoreVector sv;
  sv.schema = j.at("schema").get<std::vector<std::string>>();
  for (const auto& v : j.at("cr")) sv.cr.push_back(mv(v));
  for (const auto& v : j.at("cba")) sv.cba.push_back(mv(v));
  sv.oba = mv(j.at("oba"));
  sv.of1 = mv(j.at("of1"));
  return sv;
}

inline nlohmann::json attempt_to_json(const AttemptRecord& a) {
  nlohmann::json j = {{"attempt", a.attempt_index},
                      {"strategy", a.strategy},
                      {"class", a.example_set.cls},
                      {"examples", a.example_set.message_ids},
                      {"batch", a.batch_id},
                      {"failed", a.failed}};
  if (a.failed) {
    j["error"] = a.failure;
  } else {
    j["value"] = a.objective_value;
    j["scores"] = scores_to_json(a.scores);
  }
  if (!a.chromosome.empty()) j["chromosome"] = a.chromosome;
  if (a.window) {
    j["window"] = {{"proj", {a.window->proj.dim_a, a.window->proj.dim_b}},
                   {"box",
                    {a.window->x0, a.window->y0, a.window->x1, a.window->y1}},
                   {"depth", a.window->depth}};
  }
  return j;
}

inline AttemptRecord attempt_from_json(const nlohmann::json& j) {
  AttemptRecord a;
  a.attempt_index = j.at("attempt").get<long>();
  a.strategy = j.at("strategy").get<std::string>();
  a.example_set.cls = j.at("class").get<std::string>();
  a.example_set.message_ids =
      j.at("examples").get<std::vector<std::string>>();
  a.batch_id = j.at("batch").get<std::string>();
  a.failed = j.at("failed").get<bool>();
  if (a.failed) {
    a.failure = j.at("error").get<std::string>();
  } else {
    a.objective_value = j.at("value").get<double>();
    a.scores = scores_from_json(j.at("scores"));
  }
  if (j.contains("chromosome"))
    a.chromosome = j.at("chromosome").get<std::string>();
  if (j.contains("window")) {
    Window w;
    const auto& wj = j.at("window");
    w.proj.dim_a = wj.at("proj").at(0).get<int>();
    w.proj.dim_b = wj.at("proj").at(1).get<int>();
    w.x0 = wj.at("box").at(0).get<double>();
    w.y0 = wj.at("box").at(1).get<double>();
    w.x1 = wj.at("box").at(2).get<double>();
    w.y1 = wj.at("box").at(3).get<double>();
    w.depth = wj.at("depth").get<int>();
    a.window = w;
  }
  return a;
}

inline std::map<std::string, std::vector<AttemptRecord>> parse_attempt_log(
    const std::string& text) {
  std::map<std::string, std::vector<AttemptRecord>> out;
  long line_no = 0;
  for (const auto& line : split_char(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      std::vector<AttemptRecord> attempts;
      for (const auto& aj : j.at("attempts"))
        attempts.push_back(attempt_from_json(aj));
      out[j.at("setting").get<std::string>()] = std::move(attempts);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("attempt log line " + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Artifact plumbing.

inline std::string hex16(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return std::string(buf);
}

// Split partitions are allowed to be empty or single-class (unlike full
// datasets), so they get a permissive loader.
inline LabeledDataset load_partition(const std::string& path) {
  auto rows = parse_tsv(read_file(path));
  if (rows.empty() || rows.front().fields != std::vector<std::string>{
                                                 "id", "label", "text"})
    throw ParseError(path + ": expected header 'id<TAB>label<TAB>text'");
  LabeledDataset ds;
  for (size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 3)
      throw ParseError(path + " line " + std::to_string(row.line_no) +
                       ": expected 3 fields");
    ds.messages.push_back({row.fields[0], row.fields[1], row.fields[2]});
  }
  ds.schema = collect_schema(ds.messages);
  return ds;
}

inline fs::path out_path(const RunConfig& cfg, const std::string& name) {
  return fs::path(cfg.out) / name;
}

inline void write_manifest(RunConfig cfg, const std::string& command) {
  cfg.command = command;
  fs::create_directories(cfg.out);
  write_file(out_path(cfg, "manifest").string(), serialize_config(cfg));
}

inline Split load_split(const RunConfig& cfg) {
  for (const char* name : {"train.tsv", "opt_test.tsv", "holdout.tsv"})
    if (!fs::exists(out_path(cfg, name)))
      throw ConfigError("split files not found under '" + cfg.out +
                        "'; run the ingest command first");
  Split split;
  split.train = load_partition(out_path(cfg, "train.tsv").string());
  split.opt_test = load_partition(out_path(cfg, "opt_test.tsv").string());
  split.holdout = load_partition(out_path(cfg, "holdout.tsv").string());
  // Partitions share the source schema even when a class is absent from
  // one of them.
  std::set<ClassId> classes;
  for (const auto* ds : {&split.train, &split.opt_test, &split.holdout})
    classes.insert(ds->schema.begin(), ds->schema.end());
  std::vector<ClassId> schema(classes.begin(), classes.end());
  split.train.schema = schema;
  split.opt_test.schema = schema;
  split.holdout.schema = schema;
  return split;
}

inline std::string split_fingerprint(const Split& split) {
  uint64_t h = mix64(dataset_hash(split.train));
  h = mix64(h ^ dataset_hash(split.opt_test));
  h = mix64(h ^ dataset_hash(split.holdout));
  return hex16(h);
}

inline std::unique_ptr<Generator> make_generator(const RunConfig& cfg) {
  if (cfg.backend == "mock") return std::make_unique<MockGenerator>(false);
  if (cfg.backend == "mock-empty")
    return std::make_unique<MockGenerator>(true);
  if (cfg.backend == "eda") {
    SynonymTable table = cfg.eda.synonym_table.empty()
                             ? SynonymTable()
                             : SynonymTable::load(cfg.eda.synonym_table);
    return std::make_unique<EdaGenerator>(cfg.eda, std::move(table));
  }
  if (cfg.backend == "llm") {
    const char* url = std::getenv("AUTOGETS_LLM_ENDPOINT");
    if (!url || !*url)
      throw ConfigError(
          "gen.backend = llm requires the AUTOGETS_LLM_ENDPOINT "
          "environment variable");
    LlmEndpoint ep = make_endpoint(url);
    if (const char* key = std::getenv("AUTOGETS_LLM_API_KEY")) ep.api_key = key;
    ep.timeout_s = cfg.llm_timeout_s;
    ep.max_retries = cfg.llm_max_retries;
    ep.max_inflight = cfg.llm_max_inflight;
    fs::create_directories(cfg.out);
    ep.audit_log = out_path(cfg, "llm_audit.jsonl").string();
    return std::make_unique<LlmGenerator>(ep, cfg.llm);
  }
  throw ConfigError("gen.backend must be mock, mock-empty, eda, or llm");
}

// Everything a search-facing command needs, rebuilt deterministically
// from the split files and the configuration. Non-movable: the context
// holds pointers into this object.
struct Workspace {
  Split split;
  Embedder embedder;
  EmbeddingTable table;  // train + opt_test embeddings
  std::unique_ptr<Generator> backend;
  TrainedModel baseline_model;
  ScoreVector baseline_scores;  // on the optimization split
  std::string dataset_fingerprint;
  SearchContext ctx;

  Workspace() = default;
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
};

inline std::unique_ptr<Workspace> open_workspace(const RunConfig& cfg,
                                                 bool verify_baseline) {
  auto ws = std::make_unique<Workspace>();
  ws->split = load_split(cfg);
  if (ws->split.opt_test.empty())
    throw ConfigError("optimization split required (opt_test is empty)");
  ws->embedder = Embedder::fit(ws->split.train, cfg.embedding);
  ws->table = ws->embedder.embed_all(ws->split.train);
  for (auto& [id, vec] : ws->embedder.embed_all(ws->split.opt_test))
    ws->table.emplace(id, vec);
  ws->backend = make_generator(cfg);
  ws->dataset_fingerprint = split_fingerprint(ws->split);

  ws->baseline_model = train(cfg.model_spec(), ws->embedder, ws->split.train);
  auto preds = predict(ws->baseline_model, ws->embedder, ws->split.opt_test);
  ws->baseline_scores = score_vector(ws->split.opt_test, preds, cfg.cba());

  if (verify_baseline) {
    auto path = out_path(cfg, "scores_opt.tsv");
    if (!fs::exists(path))
      throw ConfigError("baseline scores not found under '" + cfg.out +
                        "'; run the baseline command first");
    if (read_file(path.string()) != serialize_scores(ws->baseline_scores))
      throw ConfigError(
          "stored baseline scores do not match this configuration; rerun "
          "the baseline command");
  }

  ws->ctx.split = &ws->split;
  ws->ctx.model_spec = cfg.model_spec();
  ws->ctx.backend = ws->backend.get();
  ws->ctx.embedder = &ws->embedder;
  ws->ctx.embeddings = &ws->table;
  ws->ctx.projections = enumerate_projections(
      cfg.embedding.dims, parse_projection_mode(cfg.projection_mode),
      cfg.projection_k, ws->embedder.train_variance());
  ws->ctx.sw = cfg.sw;
  ws->ctx.hsw = cfg.hsw;
  ws->ctx.ga = cfg.ga;
  ws->ctx.gen = cfg.gen;
  ws->ctx.cba = cfg.cba();
  ws->ctx.baseline_model = ws->baseline_model;
  ws->ctx.baseline_scores = ws->baseline_scores;
  ws->ctx.jobs = cfg.effective_jobs();
  return ws;
}

inline SweepGrid make_grid(const RunConfig& cfg,
                           const std::vector<ClassId>& schema) {
  SweepGrid grid;
  if (!cfg.strategies.empty()) {
    grid.strategies.clear();
    for (const auto& s : cfg.strategies)
      grid.strategies.push_back(parse_strategy(s));
  }
  if (!cfg.metrics.empty()) {
    grid.metrics.clear();
    for (const auto& m : cfg.metrics)
      grid.metrics.push_back(parse_metric_kind(m));
  }
  if (cfg.classes.empty()) {
    grid.classes = schema;
  } else {
    for (const auto& c : cfg.classes) {
      if (std::find(schema.begin(), schema.end(), c) == schema.end())
        throw ConfigError("class '" + c + "' is not in the dataset schema");
      grid.classes.push_back(c);
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Objectives file: whitespace-separated rows
//   metric  class  weight  min_threshold
// with `-` for "no class" (overall metrics) and `-` for "no threshold".
// Rows with weight > 0 form the assessment function; rows with a
// threshold become final-selection constraints; every row's target joins
// the sampling pool.

struct ObjectiveSpec {
  ObjectivePool pool;
  AssessmentFn assessment;
  std::vector<Constraint> constraints;
};

inline ObjectiveSpec parse_objectives(const std::string& text,
                                      const std::vector<ClassId>& schema,
                                      uint64_t sampler_seed) {
  ObjectiveSpec spec;
  spec.pool.sampler_seed = sampler_seed;
  long line_no = 0;
  for (const auto& raw : split_char(text, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto row_error = [&](const std::string& msg) {
      return ConfigError("objectives file row " + std::to_string(line_no) +
                         ": " + msg);
    };
    auto fields = split_ws(line);
    if (fields.size() != 4)
      throw row_error("expected metric, class, weight, min_threshold");
    MetricId target;
    try {
      target.kind = parse_metric_kind(fields[0]);
    } catch (const std::exception& e) {
      throw row_error(e.what());
    }
    if (metric_kind_is_overall(target.kind)) {
      if (fields[1] != "-")
        throw row_error("overall metric " + fields[0] +
                        " takes '-' for the class");
    } else {
      if (fields[1] == "-")
        throw row_error("per-class metric " + fields[0] + " needs a class");
      if (std::find(schema.begin(), schema.end(), fields[1]) == schema.end())
        throw row_error("class '" + fields[1] +
                        "' is not in the dataset schema");
      target.cls = fields[1];
    }
    double weight = 0.0;
    try {
      weight = parse_double(fields[2], "weight");
    } catch (const std::exception&) {
      throw row_error("malformed weight '" + fields[2] + "'");
    }
    if (weight < 0) throw row_error("weight must be >= 0");
    std::optional<double> threshold;
    if (fields[3] != "-") {
      try {
        threshold = parse_double(fields[3], "min_threshold");
      } catch (const std::exception&) {
        throw row_error("malformed min_threshold '" + fields[3] + "'");
      }
      if (*threshold < 0 || *threshold > 1)
        throw row_error("min_threshold must be in [0,1]");
    }
    if (weight == 0.0 && !threshold)
      throw row_error("row has neither a positive weight nor a threshold");

    spec.pool.objectives.push_back({target.key(), target, threshold});
    if (weight > 0) spec.assessment.weights.emplace_back(target, weight);
    if (threshold) spec.constraints.push_back({target, *threshold});
  }
  if (spec.pool.objectives.empty())
    throw ConfigError("objectives file has no objective rows");
  spec.pool.validate();
  spec.assessment.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Commands.

inline int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  if (cfg.dataset.empty())
    throw ConfigError("dataset path required (use --dataset or the config)");
  if (!fs::exists(cfg.dataset))
    throw ConfigError("dataset file not found: " + cfg.dataset);
  auto ds = load_dataset(cfg.dataset);
  auto split = stratified_split(ds, cfg.ratios, cfg.seed);

  fs::create_directories(cfg.out);
  save_dataset(split.train, out_path(cfg, "train.tsv").string());
  save_dataset(split.opt_test, out_path(cfg, "opt_test.tsv").string());
  save_dataset(split.holdout, out_path(cfg, "holdout.tsv").string());
  write_manifest(cfg, "ingest");

  // Class-size table, largest class first.
  auto totals = ds.class_sizes();
  auto train_n = split.train.class_sizes();
  auto opt_n = split.opt_test.class_sizes();
  auto hold_n = split.holdout.class_sizes();
  std::vector<ClassId> order = ds.schema;
  std::stable_sort(order.begin(), order.end(),
                   [&](const ClassId& a, const ClassId& b) {
                     return totals[a] > totals[b];
                   });
  out << "class\ttotal\ttrain\topt_test\tholdout\n";
  for (const auto& c : order)
    out << c << "\t" << totals[c] << "\t" << train_n[c] << "\t" << opt_n[c]
        << "\t" << hold_n[c] << "\n";
  out << "total\t" << ds.size() << "\t" << split.train.size() << "\t"
      << split.opt_test.size() << "\t" << split.holdout.size() << "\n";
  out << "wrote " << out_path(cfg, "train.tsv").string() << ", "
      << out_path(cfg, "opt_test.tsv").string() << ", "
      << out_path(cfg, "holdout.tsv").string() << "\n";
  return 0;
}

inline std::string brief_scores(const ScoreVector& sv) {
  std::string s = "OBA=" + fmt_double(sv.oba.value) +
                  " OF1=" + fmt_double(sv.of1.value);
  for (size_t i = 0; i < sv.schema.size(); ++i)
    s += " CR:" + sv.schema[i] + "=" + fmt_double(sv.cr[i].value);
  return s;
}

inline int cmd_baseline(const RunConfig& cfg, std::ostream& out) {
  auto ws = open_workspace(cfg, /*verify_baseline=*/false);
  write_file(out_path(cfg, "scores_opt.tsv").string(),
             serialize_scores(ws->baseline_scores));
  auto hold_preds =
      predict(ws->baseline_model, ws->embedder, ws->split.holdout);
  auto hold_scores = score_vector(ws->split.holdout, hold_preds, cfg.cba());
  write_file(out_path(cfg, "scores_holdout.tsv").string(),
             serialize_scores(hold_scores));
  write_manifest(cfg, "baseline");

  out << "baseline (optimization split): " << brief_scores(ws->baseline_scores)
      << "\n";
  out << "baseline (holdout split):      " << brief_scores(hold_scores)
      << "\n";
  out << "wrote " << out_path(cfg, "scores_opt.tsv").string() << ", "
      << out_path(cfg, "scores_holdout.tsv").string() << "\n";
  return 0;
}

inline int cmd_sweep(const RunConfig& cfg, bool resume, std::ostream& out,
                     std::ostream& err) {
  auto ws = open_workspace(cfg, /*verify_baseline=*/true);
  auto grid = make_grid(cfg, ws->split.train.schema);

  std::map<std::string, std::vector<AttemptRecord>> replay;
  auto log_path = out_path(cfg, "sweep_attempts.jsonl");
  if (resume && fs::exists(log_path)) {
    replay = parse_attempt_log(read_file(log_path.string()));
    out << "resuming: " << replay.size()
        << " completed settings replayed from " << log_path.string() << "\n";
  }

  fs::create_directories(cfg.out);
  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write " + log_path.string());

  auto on_result = [&](const SweepOutcome& oc) {
    if (oc.failed) {
      err << oc.setting.key() << " failed: " << oc.failure << "\n";
      return;
    }
    nlohmann::json line = {{"setting", oc.setting.key()},
                           {"attempts", nlohmann::json::array()}};
    for (const auto& a : oc.result.attempts)
      line["attempts"].push_back(attempt_to_json(a));
    log << line.dump() << "\n";
    log.flush();
    const auto& r = oc.result;
    Delta d = delta_of(r.baseline_value, r.best_value);
    out << oc.setting.key() << "\tbaseline=" << fmt_double(r.baseline_value)
        << "\tbest=" << fmt_double(r.best_value) << "\tdelta="
        << (d.infinite ? std::string("######") : fmt_double(d.value) + "%")
        << "\tattempts=" << r.attempts.size() << "\n";
    for (const auto& w : r.warnings)
      err << oc.setting.key() << ": " << w << "\n";
  };

  auto outcomes =
      sweep(grid, ws->ctx, Budget{cfg.budget, cfg.wall_clock_limit_s},
            derive_seed(cfg.seed, "sweep"), replay.empty() ? nullptr : &replay,
            on_result);

  auto map = build_map(outcomes, ws->baseline_scores, ws->dataset_fingerprint,
                       config_hash(cfg), cfg.budget);
  save_map(map, out_path(cfg, "map.tsv").string());
  auto tables = build_report_tables(map, ws->baseline_scores, cfg.band);
  write_file(out_path(cfg, "report.md").string(),
             report_markdown(tables, "Sweep results"));
  write_file(out_path(cfg, "report.tsv").string(), report_tsv(tables));
  write_manifest(cfg, "sweep");

  size_t failed = 0;
  for (const auto& oc : outcomes) failed += oc.failed ? 1 : 0;
  out << "map entries: " << map.entries.size();
  if (failed) out << " (" << failed << " settings failed)";
  out << "\nwrote " << out_path(cfg, "map.tsv").string() << ", "
      << out_path(cfg, "report.md").string() << ", "
      << out_path(cfg, "report.tsv").string() << "\n";
  return failed == outcomes.size() && !outcomes.empty() ? 1 : 0;
}

inline int cmd_report(const RunConfig& cfg, const std::string& map_path,
                      std::ostream& out) {
  auto path = map_path.empty() ? out_path(cfg, "map.tsv").string() : map_path;
  if (!fs::exists(path))
    throw ConfigError("knowledge map not found at '" + path +
                      "'; run the sweep command first");
  auto scores_path = out_path(cfg, "scores_opt.tsv");
  if (!fs::exists(scores_path))
    throw ConfigError("baseline scores not found under '" + cfg.out +
                      "'; run the baseline command first");
  auto map = load_map(path);
  auto baseline = parse_scores(read_file(scores_path.string()));
  auto tables = build_report_tables(map, baseline, cfg.band);
  write_file(out_path(cfg, "report.md").string(),
             report_markdown(tables, "Sweep results"));
  write_file(out_path(cfg, "report.tsv").string(), report_tsv(tables));
  out << report_markdown(tables, "Sweep results");
  out << "\nwrote " << out_path(cfg, "report.md").string() << ", "
      << out_path(cfg, "report.tsv").string() << "\n";
  return 0;
}

inline int cmd_improve(const RunConfig& cfg, bool no_map, bool force,
                       const std::string& map_path, std::ostream& out,
                       std::ostream& err) {
  auto ws = open_workspace(cfg, /*verify_baseline=*/true);
  const auto& schema = ws->split.train.schema;

  if (cfg.objectives.empty())
    throw ConfigError(
        "objectives file required (use --objectives or improve.objectives)");
  if (!fs::exists(cfg.objectives))
    throw ConfigError("objectives file not found: " + cfg.objectives);
  auto spec = parse_objectives(read_file(cfg.objectives), schema,
                               derive_seed(cfg.seed, "objectives"));

  std::optional<KnowledgeMap> map;
  if (!no_map) {
    auto path =
        map_path.empty() ? out_path(cfg, "map.tsv").string() : map_path;
    if (fs::exists(path)) {
      auto loaded = load_map(path);
      std::vector<std::string> warnings;
      check_map(loaded, schema, ws->dataset_fingerprint, force, &warnings);
      for (const auto& w : warnings) err << "warning: " << w << "\n";
      map = std::move(loaded);
      out << "using knowledge map " << path << " (" << map->entries.size()
          << " entries)\n";
    } else {
      out << "no knowledge map found; phase 1 runs the systematic sweep\n";
    }
  } else {
    out << "knowledge map disabled; phase 1 runs the systematic sweep\n";
  }

  auto grid = make_grid(cfg, schema);
  EnsembleParams params;
  params.phases = cfg.phases;
  params.phase_budget = cfg.phase_budget;
  params.k = cfg.top_k;

  std::string phase_log =
      "phase\tobjective\tmode\tsettings\tallocations\tbest_delta\ts_before\t"
      "s_after\taccepted\tbatch\n";
  auto on_phase = [&](const PhaseRecord& rec) {
    std::string mode =
        rec.swept ? "sweep" : (rec.fallback ? "fallback" : "map");
    std::vector<std::string> allocs;
    for (long a : rec.allocations) allocs.push_back(std::to_string(a));
    phase_log += tsv_line(
        {std::to_string(rec.phase), rec.objective_id, mode,
         join(rec.setting_keys, ","), join(allocs, ","),
         rec.best_delta.infinite ? std::string("inf")
                                 : fmt_double(rec.best_delta.value),
         fmt_double(rec.s_before), fmt_double(rec.s_after),
         rec.accepted ? "yes" : "no", rec.accepted_batch_id});
    out << "phase " << rec.phase << ": objective " << rec.objective_id
        << " mode=" << mode << " settings=" << rec.setting_keys.size()
        << " S " << fmt_double(rec.s_before) << " -> "
        << fmt_double(rec.s_after)
        << (rec.accepted ? " accepted " + rec.accepted_batch_id : "") << "\n";
  };

  auto res = run_ensemble(spec.pool, spec.assessment, params, std::move(map),
                          grid, ws->ctx, derive_seed(cfg.seed, "improve"),
                          {ws->dataset_fingerprint, config_hash(cfg)},
                          on_phase);
  for (const auto& w : res.warnings) err << "warning: " << w << "\n";

  auto sel = select_final(res.pool, spec.assessment, spec.constraints);
  const auto& entry = res.pool[sel.pool_index];
  out << "final model: phase " << entry.phase << " (" << entry.setting_key
      << "), S=" << fmt_double(spec.assessment.value(sel.scores)) << "\n";
  for (const auto& v : sel.violations)
    err << "constraint violated: " << v << "\n";

  save_model(sel.model, out_path(cfg, "final_model.tsv").string());
  write_file(out_path(cfg, "final_scores.tsv").string(),
             serialize_scores(sel.scores));
  if (!ws->split.holdout.empty()) {
    auto hold_preds = predict(sel.model, ws->embedder, ws->split.holdout);
    auto hold_scores = score_vector(ws->split.holdout, hold_preds, cfg.cba());
    write_file(out_path(cfg, "final_scores_holdout.tsv").string(),
               serialize_scores(hold_scores));
    out << "holdout: " << brief_scores(hold_scores) << "\n";
  }
  write_file(out_path(cfg, "phase_log.tsv").string(), phase_log);
  save_map(res.map, out_path(cfg, "map_refreshed.tsv").string());
  write_manifest(cfg, "improve");

  out << "wrote " << out_path(cfg, "final_model.tsv").string() << ", "
      << out_path(cfg, "final_scores.tsv").string() << ", "
      << out_path(cfg, "phase_log.tsv").string() << ", "
      << out_path(cfg, "map_refreshed.tsv").string() << "\n";
  return 0;
}

inline int cmd_dump_projection(const RunConfig& cfg, const std::string& cls,
                               const std::string& proj_arg,
                               std::ostream& out) {
  auto ws = open_workspace(cfg, /*verify_baseline=*/false);
  if (!ws->split.train.has_class(cls))
    throw ConfigError("class '" + cls + "' is not in the dataset schema");
  auto parts = detail::parse_list(proj_arg);
  if (parts.size() != 2)
    throw ConfigError("--proj takes two dimension indices, e.g. 0,4");
  Projection proj{static_cast<int>(parse_long(parts[0], "projection dim")),
                  static_cast<int>(parse_long(parts[1], "projection dim"))};
  if (proj.dim_a < 0 || proj.dim_b < 0 || proj.dim_a >= cfg.embedding.dims ||
      proj.dim_b >= cfg.embedding.dims || proj.dim_a == proj.dim_b)
    throw ConfigError("--proj needs two distinct dimensions below " +
                      std::to_string(cfg.embedding.dims));
  auto preds = predict(ws->baseline_model, ws->embedder, ws->split.opt_test);
  auto points = color_points(ws->split, cls, preds, proj, ws->table);
  auto name = "projection_" + cls + "_" + std::to_string(proj.dim_a) + "_" +
              std::to_string(proj.dim_b) + ".tsv";
  write_file(out_path(cfg, name).string(), serialize_points(points));
  out << "wrote " << out_path(cfg, name).string() << " (" << points.size()
      << " points)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch.

inline int run_cli(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"Text-classifier improvement via optimized synthetic data"};
  app.name("autogets");
  app.require_subcommand(1);

  struct Raw {
    std::string config;
    std::vector<std::pair<std::string, std::string>> overrides;
    bool no_map = false;
    bool force = false;
    bool resume = false;
    std::string map_path;
    std::string cls;
    std::string proj = "0,1";
  } raw;

  auto key_opt = [&raw](CLI::App* cmd, const std::string& flag,
                        const std::string& key, const std::string& desc) {
    cmd->add_option_function<std::string>(
        flag,
        [&raw, key](const std::string& v) {
          raw.overrides.emplace_back(key, v);
        },
        desc);
  };
  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", raw.config,
                    "config or manifest file (key = value lines)");
    cmd->add_option_function<std::vector<std::string>>(
        "--set",
        [&raw](const std::vector<std::string>& pairs) {
          for (const auto& p : pairs) {
            auto eq = p.find('=');
            if (eq == std::string::npos)
              throw ConfigError("--set expects KEY=VALUE, got '" + p + "'");
            raw.overrides.emplace_back(trim(p.substr(0, eq)),
                                       trim(p.substr(eq + 1)));
          }
        },
        "override any config key (KEY=VALUE, repeatable)");
    key_opt(cmd, "--dataset", "dataset", "source dataset TSV");
    key_opt(cmd, "--out", "out", "output directory");
    key_opt(cmd, "--seed", "seed", "master seed");
    key_opt(cmd, "--jobs", "jobs", "parallel workers (0 = logical CPUs)");
    return cmd;
  };

  auto* ingest = common(app.add_subcommand(
      "ingest", "split a dataset and print the class-size table"));
  auto* baseline = common(app.add_subcommand(
      "baseline", "train and score the baseline model"));
  auto* sweep_cmd = common(app.add_subcommand(
      "sweep", "run the strategy/metric/class grid and build the map"));
  key_opt(sweep_cmd, "--budget", "budget", "attempts per setting");
  key_opt(sweep_cmd, "--strategies", "sweep.strategies",
          "comma list: SW,HSW,GA");
  key_opt(sweep_cmd, "--metrics", "sweep.metrics",
          "comma list: CR,CBA,OBA,OF1");
  key_opt(sweep_cmd, "--classes", "sweep.classes", "comma list of classes");
  key_opt(sweep_cmd, "--backend", "gen.backend", "generator backend");
  sweep_cmd->add_flag("--resume", raw.resume,
                      "replay completed settings from the attempt log");
  auto* report = common(app.add_subcommand(
      "report", "render the knowledge map as markdown and TSV tables"));
  key_opt(report, "--band", "report.band", "best-strategy tie band");
  report->add_option("--map", raw.map_path, "knowledge map file");
  auto* improve = common(app.add_subcommand(
      "improve", "multi-phase, multi-objective model improvement"));
  key_opt(improve, "--objectives", "improve.objectives",
          "objectives file (metric class weight min_threshold)");
  key_opt(improve, "--phases", "improve.phases", "outer phases");
  key_opt(improve, "--phase-budget", "improve.phase_budget",
          "attempts per phase");
  key_opt(improve, "--k", "improve.k", "settings taken from the map");
  key_opt(improve, "--backend", "gen.backend", "generator backend");
  improve->add_flag("--no-map", raw.no_map,
                    "ignore any saved map; sweep in phase 1");
  improve->add_flag("--force", raw.force,
                    "use a map whose dataset fingerprint mismatches");
  improve->add_option("--map", raw.map_path, "knowledge map file");
  auto* dump = common(app.add_subcommand(
      "dump-projection", "write 2-D projected, colored training points"));
  dump->add_option("--class", raw.cls, "target class")->required();
  dump->add_option("--proj", raw.proj, "two embedding dimensions (A,B)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    RunConfig cfg;
    if (!raw.config.empty()) cfg = load_config(raw.config, std::move(cfg));
    for (const auto& [key, value] : raw.overrides)
      detail::set_config_key(cfg, key, value);
    cfg.validate();

    if (app.got_subcommand(ingest)) return cmd_ingest(cfg, out);
    if (app.got_subcommand(baseline)) return cmd_baseline(cfg, out);
    if (app.got_subcommand(sweep_cmd))
      return cmd_sweep(cfg, raw.resume, out, err);
    if (app.got_subcommand(report))
      return cmd_report(cfg, raw.map_path, out);
    if (app.got_subcommand(improve))
      return cmd_improve(cfg, raw.no_map, raw.force, raw.map_path, out, err);
    if (app.got_subcommand(dump))
      return cmd_dump_projection(cfg, raw.cls, raw.proj, out);
    err << "error: no subcommand selected\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace autogets::cli
