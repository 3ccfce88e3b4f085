#pragma once
// Train/predict abstraction over embedded messages. The built-in
// reference trainer is L2-regularized multinomial logistic regression
// fitted by full-batch gradient descent; an external trainer can be
// plugged in as a subprocess working over TSV files.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "autogets/common.hpp"
#include "autogets/corpus.hpp"
#include "autogets/features.hpp"
#include "autogets/metrics.hpp"
#include "autogets/tsv.hpp"

namespace autogets {

struct ModelSpec {
  std::string trainer = "reference";
  std::map<std::string, std::string> hyper;
};

struct ReferenceHyper {
  long epochs = 300;
  double learning_rate = 0.2;
  double l2 = 1.0;
  uint64_t seed = 0;  // recorded; the zero-init trainer has no random state
};

inline ReferenceHyper parse_reference_hyper(const ModelSpec& spec) {
  ReferenceHyper h;
  for (const auto& [key, value] : spec.hyper) {
    if (key == "epochs") h.epochs = parse_long(value, "epochs");
    else if (key == "learning_rate") h.learning_rate = parse_double(value, "learning_rate");
    else if (key == "l2") h.l2 = parse_double(value, "l2");
    else if (key == "seed") h.seed = static_cast<uint64_t>(parse_long(value, "seed"));
    else throw ConfigError("reference trainer: unknown hyperparameter '" + key + "'");
  }
  if (h.epochs < 1) throw ConfigError("reference trainer: epochs must be >= 1");
  if (h.learning_rate <= 0) throw ConfigError("reference trainer: learning_rate must be > 0");
  if (h.l2 < 0) throw ConfigError("reference trainer: l2 must be >= 0");
  return h;
}

struct TrainedModel {
  ModelSpec spec;
  std::vector<ClassId> schema;
  uint64_t feature_fingerprint = 0;
  std::vector<std::string> provenance;  // synthetic batch ids folded in

  // reference trainer: row-major (dims + 1) x K weights, bias row first
  std::vector<double> weights;
  // external trainer: the serialized training set handed to the subprocess
  std::string external_train_tsv;
};

namespace detail {

inline void softmax_row(std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

inline std::vector<double> train_logreg(const std::vector<FeatureVector>& xs,
                                        const std::vector<size_t>& ys,
                                        size_t n_classes, size_t dims,
                                        const ReferenceHyper& h) {
  size_t d1 = dims + 1;  // bias term first
  std::vector<double> w(d1 * n_classes, 0.0);
  size_t n = xs.size();
  std::vector<double> grad(w.size());
  std::vector<double> logits(n_classes);
  for (long epoch = 0; epoch < h.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      for (size_t k = 0; k < n_classes; ++k) {
        double z = w[k];  // bias
        for (size_t d = 0; d < dims; ++d) z += xs[i][d] * w[(d + 1) * n_classes + k];
        logits[k] = z;
      }
      softmax_row(logits);
      for (size_t k = 0; k < n_classes; ++k) {
        double err = logits[k] - (ys[i] == k ? 1.0 : 0.0);
        grad[k] += err;
        for (size_t d = 0; d < dims; ++d)
          grad[(d + 1) * n_classes + k] += err * xs[i][d];
      }
    }
    double inv_n = 1.0 / static_cast<double>(n);
    for (size_t j = 0; j < w.size(); ++j) {
      double g = grad[j] * inv_n;
      if (j >= n_classes) g += h.l2 * inv_n * w[j];  // bias row unregularized
      w[j] -= h.learning_rate * g;
    }
  }
  return w;
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  out += "'";
  return out;
}

}  // namespace detail

inline TrainedModel train(const ModelSpec& spec, const Embedder& embedder,
                          const LabeledDataset& train_data,
                          const std::vector<Message>& synthetic = {},
                          const std::vector<std::string>& batch_ids = {}) {
  if (train_data.empty()) throw std::runtime_error("train: empty training data");
  for (const auto& m : synthetic)
    if (!train_data.has_class(m.label))
      throw std::runtime_error("synthetic label '" + m.label +
                               "' outside training schema");

  TrainedModel model;
  model.spec = spec;
  model.schema = train_data.schema;
  model.feature_fingerprint = embedder.fingerprint();
  model.provenance = batch_ids;

  if (spec.trainer == "reference") {
    ReferenceHyper h = parse_reference_hyper(spec);
    size_t dims = static_cast<size_t>(embedder.dims());
    std::vector<FeatureVector> xs;
    std::vector<size_t> ys;
    auto class_index = [&](const ClassId& c) -> size_t {
      auto it = std::lower_bound(model.schema.begin(), model.schema.end(), c);
      return static_cast<size_t>(it - model.schema.begin());
    };
    for (const auto& m : train_data.messages) {
      xs.push_back(embedder.embed(m.text));
      ys.push_back(class_index(m.label));
    }
    for (const auto& m : synthetic) {
      xs.push_back(embedder.embed(m.text));
      ys.push_back(class_index(m.label));
    }
    model.weights = detail::train_logreg(xs, ys, model.schema.size(), dims, h);
    return model;
  }

  if (spec.trainer == "external") {
    if (!spec.hyper.count("command"))
      throw ConfigError("external trainer requires hyperparameter 'command'");
    LabeledDataset combined = train_data;
    for (const auto& m : synthetic) combined.messages.push_back(m);
    model.external_train_tsv = serialize_dataset(combined);
    return model;
  }

  throw ConfigError("unknown trainer '" + spec.trainer + "'");
}

inline PredictionSet predict(const TrainedModel& model, const Embedder& embedder,
                             const LabeledDataset& ds) {
  if (model.feature_fingerprint != embedder.fingerprint())
    throw std::runtime_error(
        "feature-config mismatch: model was trained under different "
        "embedding statistics");
  PredictionSet out;
  if (ds.empty()) return out;

  if (model.spec.trainer == "reference") {
    size_t n_classes = model.schema.size();
    size_t dims = static_cast<size_t>(embedder.dims());
    for (const auto& m : ds.messages) {
      FeatureVector x = embedder.embed(m.text);
      size_t best = 0;
      double best_z = -1e300;
      for (size_t k = 0; k < n_classes; ++k) {
        double z = model.weights[k];
        for (size_t d = 0; d < dims; ++d)
          z += x[d] * model.weights[(d + 1) * n_classes + k];
        if (z > best_z) {  // ties keep the earliest schema class
          best_z = z;
          best = k;
        }
      }
      out.by_id[m.id] = model.schema[best];
    }
    return out;
  }

  if (model.spec.trainer == "external") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() /
                   ("autogets-ext-" + std::to_string(mix64(fnv1a(model.external_train_tsv) ^
                                                           fnv1a(serialize_dataset(ds)))));
    fs::create_directories(dir);
    fs::path train_file = dir / "train.tsv";
    fs::path eval_file = dir / "eval.tsv";
    fs::path out_file = dir / "predictions.tsv";
    write_file(train_file.string(), model.external_train_tsv);
    write_file(eval_file.string(), serialize_dataset(ds));
    std::string cmd = model.spec.hyper.at("command") + " " +
                      detail::shell_quote(train_file.string()) + " " +
                      detail::shell_quote(eval_file.string()) + " " +
                      detail::shell_quote(out_file.string());
    int rc = std::system(cmd.c_str());
    if (rc != 0)
      throw std::runtime_error("external trainer failed with status " +
                               std::to_string(rc));
    auto rows = parse_tsv(read_file(out_file.string()));
    for (const auto& row : rows) {
      if (row.fields.size() != 2)
        throw ParseError("external trainer output line " +
                         std::to_string(row.line_no) + ": expected id<TAB>label");
      out.by_id[row.fields[0]] = row.fields[1];
    }
    fs::remove_all(dir);
    return out;
  }

  throw ConfigError("unknown trainer '" + model.spec.trainer + "'");
}

// ---------------------------------------------------------------------------
// Model persistence: versioned text format, lossless for both trainers.

inline constexpr const char* kModelMagic = "# autogets-model v1";

inline std::string serialize_model(const TrainedModel& model) {
  std::string out = std::string(kModelMagic) + "\n";
  out += "# trainer: " + model.spec.trainer + "\n";
  out += "# fingerprint: " + std::to_string(model.feature_fingerprint) + "\n";
  {
    std::vector<std::string> cells;
    for (const auto& c : model.schema) cells.push_back(c);
    out += "# schema:\n" + tsv_line(cells);
  }
  out += "# hyper: " + std::to_string(model.spec.hyper.size()) + "\n";
  for (const auto& [key, value] : model.spec.hyper)  // std::map: sorted keys
    out += tsv_line({key, value});
  out += "# provenance: " + std::to_string(model.provenance.size()) + "\n";
  for (const auto& batch : model.provenance) out += tsv_line({batch});
  size_t cols = model.schema.size();
  size_t rows = cols == 0 ? 0 : model.weights.size() / cols;
  out += "# weights: " + std::to_string(rows) + " " + std::to_string(cols) + "\n";
  for (size_t r = 0; r < rows; ++r) {
    std::vector<std::string> cells;
    for (size_t c = 0; c < cols; ++c)
      cells.push_back(fmt_double(model.weights[r * cols + c]));
    out += tsv_line(cells);
  }
  auto ext_lines = model.external_train_tsv.empty()
                       ? std::vector<std::string>{}
                       : split_char(model.external_train_tsv, '\n');
  // split_char keeps a trailing empty piece after a final newline; drop it
  // so the line count reflects actual content lines.
  if (!ext_lines.empty() && ext_lines.back().empty()) ext_lines.pop_back();
  out += "# external-train: " + std::to_string(ext_lines.size()) + "\n";
  for (const auto& line : ext_lines) out += line + "\n";
  return out;
}

inline TrainedModel parse_model(const std::string& text) {
  auto lines = split_char(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  size_t at = 0;
  auto next = [&]() -> const std::string& {
    if (at >= lines.size())
      throw ParseError("model file truncated at line " + std::to_string(at + 1));
    return lines[at++];
  };
  auto expect_prefix = [&](const std::string& prefix) {
    const std::string& line = next();
    if (line.rfind(prefix, 0) != 0)
      throw ParseError("model file line " + std::to_string(at) +
                       ": expected '" + prefix + "'");
    return line.substr(prefix.size());
  };
  auto parse_fields = [&](const std::string& line) {
    auto rows = parse_tsv(line + "\n");
    return rows.empty() ? std::vector<std::string>{} : rows[0].fields;
  };

  if (next() != kModelMagic)
    throw ParseError("not a model file (bad or missing header magic)");
  TrainedModel model;
  model.spec.trainer = expect_prefix("# trainer: ");
  try {
    model.feature_fingerprint = static_cast<uint64_t>(
        std::stoull(expect_prefix("# fingerprint: ")));
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("model file: malformed fingerprint");
  }
  expect_prefix("# schema:");
  for (auto& cell : parse_fields(next())) model.schema.push_back(cell);
  long n_hyper = parse_long(expect_prefix("# hyper: "), "hyper count");
  for (long i = 0; i < n_hyper; ++i) {
    auto fields = parse_fields(next());
    if (fields.size() != 2)
      throw ParseError("model file line " + std::to_string(at) +
                       ": hyper row needs 2 fields");
    model.spec.hyper[fields[0]] = fields[1];
  }
  long n_prov = parse_long(expect_prefix("# provenance: "), "provenance count");
  for (long i = 0; i < n_prov; ++i) {
    auto fields = parse_fields(next());
    if (fields.size() != 1)
      throw ParseError("model file line " + std::to_string(at) +
                       ": provenance row needs 1 field");
    model.provenance.push_back(fields[0]);
  }
  auto dims = split_ws(expect_prefix("# weights: "));
  if (dims.size() != 2) throw ParseError("model file: malformed weights header");
  long rows = parse_long(dims[0], "weight rows");
  long cols = parse_long(dims[1], "weight cols");
  if (cols != static_cast<long>(model.schema.size()))
    throw ParseError("model file: weight columns do not match the schema");
  for (long r = 0; r < rows; ++r) {
    auto fields = parse_fields(next());
    if (static_cast<long>(fields.size()) != cols)
      throw ParseError("model file line " + std::to_string(at) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(cols));
    for (const auto& f : fields)
      model.weights.push_back(parse_double(f, "weight"));
  }
  long n_ext = parse_long(expect_prefix("# external-train: "), "external line count");
  for (long i = 0; i < n_ext; ++i) model.external_train_tsv += next() + "\n";
  if (at != lines.size())
    throw ParseError("model file has trailing content at line " +
                     std::to_string(at + 1));
  return model;
}

inline void save_model(const TrainedModel& model, const std::string& path) {
  write_file(path, serialize_model(model));
}

inline TrainedModel load_model(const std::string& path) {
  return parse_model(read_file(path));
}

}  // namespace autogets
