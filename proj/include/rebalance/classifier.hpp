#pragma once

// Linear classifier over TF-IDF features trained by SGD.
//
// Objective: (1/n) sum_i loss(y_i, w.x_i + b) + (l2_lambda / 2) |w|^2 with
// y in {-1, +1} (label 0 -> -1, label 1 -> +1). Logistic loss is
// ln(1 + exp(-y z)); hinge loss is max(0, 1 - y z).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rebalance/corpus.hpp"
#include "rebalance/error.hpp"
#include "rebalance/io.hpp"
#include "rebalance/random.hpp"
#include "rebalance/text.hpp"

namespace rebalance {

enum class LossKind { Logistic, Hinge };

inline std::string_view loss_name(LossKind k) { return k == LossKind::Hinge ? "hinge" : "logistic"; }

inline LossKind parse_loss(std::string_view name) {
  if (name == "logistic") return LossKind::Logistic;
  if (name == "hinge" || name == "svm") return LossKind::Hinge;
  throw ConfigError("unknown loss kind: " + std::string(name));
}

struct TrainConfig {
  LossKind loss = LossKind::Logistic;
  double l2_lambda = 1e-4;
  double learning_rate = 0.1;  // decays as learning_rate / sqrt(epoch)
  std::size_t epochs = 20;
  std::uint64_t seed = 42;
  double decision_threshold = 0.5;

  void validate() const {
    if (!(l2_lambda >= 0.0)) throw PreconditionError("l2_lambda must be >= 0");
    if (!(learning_rate > 0.0)) throw PreconditionError("learning_rate must be > 0");
    if (epochs < 1) throw PreconditionError("epochs must be >= 1");
    if (!(decision_threshold > 0.0 && decision_threshold < 1.0)) {
      throw PreconditionError("decision_threshold must lie in (0, 1)");
    }
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"loss", loss_name(c.loss)},     {"l2_lambda", c.l2_lambda},
          {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"seed", c.seed},                 {"decision_threshold", c.decision_threshold}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.loss = parse_loss(j.at("loss").get<std::string>());
  c.l2_lambda = j.at("l2_lambda").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.decision_threshold = j.at("decision_threshold").get<double>();
  return c;
}

struct FeatureRow {
  SparseVector x;
  Label y = Label::Positive;
};

inline double signed_label(Label y) { return y == Label::Positive ? 1.0 : -1.0; }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ln(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double loss_value(LossKind kind, double y, double z) {
  return kind == LossKind::Logistic ? softplus(-y * z) : std::max(0.0, 1.0 - y * z);
}

// d loss / d z. The hinge subgradient at the kink is taken as 0.
inline double loss_slope(LossKind kind, double y, double z) {
  if (kind == LossKind::Logistic) return -y * sigmoid(-y * z);
  return y * z < 1.0 ? -y : 0.0;
}

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  LossKind loss = LossKind::Logistic;
  std::uint64_t vocab_fingerprint = 0;
  TrainConfig config;

  // Hinge scores are squashed through the sigmoid but are not probabilities.
  bool calibrated() const { return loss == LossKind::Logistic; }

  double margin(const SparseVector& x) const {
    if (x.vocab_fingerprint() != vocab_fingerprint) throw VocabularyMismatch();
    double z = bias;
    for (const auto& [i, v] : x.entries()) z += weights.at(i) * v;
    return z;
  }

  nlohmann::json to_json() const {
    nlohmann::json w = nlohmann::json::object();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] != 0.0) w[std::to_string(i)] = weights[i];
    }
    return {{"loss_kind", loss_name(loss)},
            {"bias", bias},
            {"n_features", weights.size()},
            {"weights", w},
            {"vocab_fingerprint", to_hex(vocab_fingerprint)},
            {"train_config", rebalance::to_json(config)}};
  }

  static LinearModel from_json(const nlohmann::json& j) {
    try {
      LinearModel m;
      m.loss = parse_loss(j.at("loss_kind").get<std::string>());
      m.bias = j.at("bias").get<double>();
      m.weights.assign(j.at("n_features").get<std::size_t>(), 0.0);
      for (const auto& [key, value] : j.at("weights").items()) {
        const auto index = std::stoul(key);
        if (index >= m.weights.size()) throw ConfigError("weight index out of range: " + key);
        m.weights[index] = value.get<double>();
      }
      m.vocab_fingerprint = std::stoull(j.at("vocab_fingerprint").get<std::string>(), nullptr, 16);
      m.config = train_config_from_json(j.at("train_config"));
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid model file: ") + e.what());
    } catch (const std::logic_error& e) {
      throw ConfigError(std::string("invalid model file: ") + e.what());
    }
  }

  void save(const std::filesystem::path& path) const { io::write_file(path, to_json().dump(2) + "\n"); }

  static LinearModel load(const std::filesystem::path& path) {
    const auto data = io::read_file(path);
    try {
      return from_json(nlohmann::json::parse(data));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("invalid model JSON in " + path.string() + ": " + e.what());
    }
  }
};

inline std::vector<FeatureRow> featurize(const Corpus& corpus, const Vocabulary& vocab,
                                         const NormalizeOptions& norm = {}) {
  std::vector<FeatureRow> rows;
  rows.reserve(corpus.size());
  for (const auto& ex : corpus) rows.push_back({vectorize(analyze(ex.text, norm), vocab), ex.label});
  return rows;
}

// Vocabulary fitted on the normalized, tokenized texts of a corpus.
inline Vocabulary fit_corpus_vocabulary(const Corpus& corpus, std::size_t min_df = 1,
                                        const NormalizeOptions& norm = {}) {
  std::vector<TokenSequence> docs;
  docs.reserve(corpus.size());
  for (const auto& ex : corpus) docs.push_back(analyze(ex.text, norm));
  return fit_vocabulary(docs, min_df);
}

struct Gradient {
  std::vector<double> weights;
  double bias = 0.0;
};

// Regularized objective on a batch.
inline double objective(const LinearModel& model, std::span<const FeatureRow> batch,
                        double l2_lambda) {
  if (batch.empty()) throw PreconditionError("objective needs a non-empty batch");
  double loss = 0.0;
  for (const auto& row : batch) loss += loss_value(model.loss, signed_label(row.y), model.margin(row.x));
  double w2 = 0.0;
  for (double w : model.weights) w2 += w * w;
  return loss / static_cast<double>(batch.size()) + 0.5 * l2_lambda * w2;
}

// Analytic gradient of objective().
inline Gradient gradient(const LinearModel& model, std::span<const FeatureRow> batch,
                         double l2_lambda) {
  if (batch.empty()) throw PreconditionError("gradient needs a non-empty batch");
  Gradient g;
  g.weights.assign(model.weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& row : batch) {
    const double slope = loss_slope(model.loss, signed_label(row.y), model.margin(row.x)) * inv_n;
    for (const auto& [i, v] : row.x.entries()) g.weights[i] += slope * v;
    g.bias += slope;
  }
  for (std::size_t i = 0; i < g.weights.size(); ++i) g.weights[i] += l2_lambda * model.weights[i];
  return g;
}

// Per-example SGD, sequential within each epoch and reshuffled every epoch.
// The L2 term is applied as a proximal shrink w <- w / (1 + eta * lambda),
// which stays stable for any lambda; the weight vector is stored as
// scale * v so the shrink costs O(1).
inline LinearModel train_rows(std::span<const FeatureRow> rows, std::size_t n_features,
                              std::uint64_t vocab_fingerprint, const TrainConfig& cfg) {
  cfg.validate();
  bool has_pos = false, has_neg = false;
  for (const auto& r : rows) (r.y == Label::Positive ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw SingleClassTrainingSet();

  std::vector<double> v(n_features, 0.0);
  double scale = 1.0;
  double bias = 0.0;
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double eta = cfg.learning_rate / std::sqrt(static_cast<double>(epoch));
    Rng rng(derive_seed(cfg.seed, epoch));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const auto& row = rows[idx];
      if (row.x.vocab_fingerprint() != vocab_fingerprint) throw VocabularyMismatch();
      double z = bias;
      for (const auto& [i, x] : row.x.entries()) z += scale * v[i] * x;
      const double y = signed_label(row.y);
      epoch_loss += loss_value(cfg.loss, y, z);
      const double slope = loss_slope(cfg.loss, y, z);
      if (slope != 0.0) {
        for (const auto& [i, x] : row.x.entries()) v[i] -= eta * slope * x / scale;
        bias -= eta * slope;
      }
      scale /= 1.0 + eta * cfg.l2_lambda;
      if (scale < 1e-9) {
        for (double& w : v) w *= scale;
        scale = 1.0;
      }
    }
    if (!std::isfinite(epoch_loss) || !std::isfinite(bias)) throw NonFiniteLoss();
  }

  LinearModel model;
  model.weights.resize(n_features);
  for (std::size_t i = 0; i < n_features; ++i) {
    model.weights[i] = scale * v[i];
    if (!std::isfinite(model.weights[i])) throw NonFiniteLoss();
  }
  model.bias = bias;
  model.loss = cfg.loss;
  model.vocab_fingerprint = vocab_fingerprint;
  model.config = cfg;
  return model;
}

inline LinearModel train(const Corpus& corpus, const Vocabulary& vocab, const TrainConfig& cfg,
                         const NormalizeOptions& norm = {}) {
  const auto rows = featurize(corpus, vocab, norm);
  return train_rows(rows, vocab.size(), vocab.fingerprint(), cfg);
}

inline double predict_proba(const LinearModel& model, const SparseVector& x) {
  return sigmoid(model.margin(x));
}

// Inclusive boundary: probability == threshold predicts label 1.
inline Label predict(const LinearModel& model, const SparseVector& x, double threshold) {
  return predict_proba(model, x) >= threshold ? Label::Positive : Label::Negative;
}

inline Label predict(const LinearModel& model, const SparseVector& x) {
  return predict(model, x, model.config.decision_threshold);
}

}  // namespace rebalance
