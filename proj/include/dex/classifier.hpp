/*
 * Copyright 2026 The DeX Engine Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DEX_CLASSIFIER_HPP
#define DEX_CLASSIFIER_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "dex/core.hpp"
#include "dex/random.hpp"

namespace dex {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(sigmoid(z)) without overflow.
inline double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

// Linear logit model: logit = w.x + b, positive logit means private.
struct ClassifierWeights {
  std::vector<double> weights;
  double bias = 0.0;

  std::size_t dimension() const { return weights.size(); }

  double logit(const EmbeddingVector& x) const {
    x.require_size(weights.size(), "classifier input");
    return dot(std::span<const double>(weights), x.values()) + bias;
  }

  bool operator==(const ClassifierWeights&) const = default;
};

struct Prediction {
  PrivacyLabel label = PrivacyLabel::kPublic;
  // Probability of `label`; always >= 0.5.
  double confidence = 0.5;
  double logit = 0.0;

  double probability_of(PrivacyLabel l) const { return l == label ? confidence : 1.0 - confidence; }
};

// A zero logit is classified public.
inline Prediction predict(const ClassifierWeights& w, const EmbeddingVector& x) {
  Prediction p;
  p.logit = w.logit(x);
  p.label = p.logit > 0.0 ? PrivacyLabel::kPrivate : PrivacyLabel::kPublic;
  p.confidence = sigmoid(std::abs(p.logit));
  return p;
}

struct LossAndGradient {
  double loss = 0.0;
  EmbeddingVector grad_x;
};

// Binary cross-entropy of the logit against `target` and its gradient with
// respect to the input embedding: (sigmoid(z) - [target == private]) * w.
inline LossAndGradient loss_and_gradient(const ClassifierWeights& w, const EmbeddingVector& x,
                                         PrivacyLabel target) {
  const double z = w.logit(x);
  const bool is_private = target == PrivacyLabel::kPrivate;
  LossAndGradient out;
  out.loss = is_private ? -log_sigmoid(z) : -log_sigmoid(-z);
  const double scale = sigmoid(z) - (is_private ? 1.0 : 0.0);
  std::vector<double> g(w.weights.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * w.weights[i];
  out.grad_x = EmbeddingVector(std::move(g));
  return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 1e-3;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (epochs <= 0 || batch_size <= 0 || !(learning_rate > 0.0)) {
      throw ValidationError("training hyperparameters must be positive");
    }
  }
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  ClassifierWeights weights;
  double train_accuracy = 0.0;
  std::vector<EpochLog> log;
};

struct LabeledEmbedding {
  EmbeddingVector x;
  PrivacyLabel label;
};

namespace detail {

inline EpochLog evaluate_epoch(const ClassifierWeights& w, const std::vector<LabeledEmbedding>& data, int epoch) {
  EpochLog e;
  e.epoch = epoch;
  std::size_t correct = 0;
  for (const auto& item : data) {
    const double z = w.logit(item.x);
    e.loss += item.label == PrivacyLabel::kPrivate ? -log_sigmoid(z) : -log_sigmoid(-z);
    if (predict(w, item.x).label == item.label) ++correct;
  }
  e.loss /= static_cast<double>(data.size());
  e.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return e;
}

}  // namespace detail

// Mini-batch Adam on mean binary cross-entropy, starting from zero weights.
// The epoch order is a seeded shuffle, so a fixed seed reproduces the weights
// bit for bit.
inline TrainResult train(const std::vector<LabeledEmbedding>& data, const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw TrainingError("training set is empty");
  const std::size_t d = data.front().x.size();
  bool has_private = false;
  bool has_public = false;
  for (const auto& item : data) {
    item.x.require_size(d, "training example");
    (item.label == PrivacyLabel::kPrivate ? has_private : has_public) = true;
  }
  if (!has_private || !has_public) throw TrainingError("training set contains a single class");

  ClassifierWeights w;
  w.weights.assign(d, 0.0);
  std::vector<double> m(d + 1, 0.0);
  std::vector<double> v(d + 1, 0.0);
  std::vector<double> grad(d + 1, 0.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  long step = 0;

  TrainResult result;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto& item = data[order[k]];
        const double residual = sigmoid(w.logit(item.x)) - (item.label == PrivacyLabel::kPrivate ? 1.0 : 0.0);
        for (std::size_t i = 0; i < d; ++i) grad[i] += residual * item.x[i];
        grad[d] += residual;
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      ++step;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i <= d; ++i) {
        const double g = grad[i] * inv;
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
        const double update = config.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.epsilon);
        if (i < d) {
          w.weights[i] -= update;
        } else {
          w.bias -= update;
        }
      }
    }
    EpochLog e = detail::evaluate_epoch(w, data, epoch);
    if (!std::isfinite(e.loss)) throw DivergenceError("classifier training", "epoch", epoch);
    result.log.push_back(e);
  }
  result.weights = std::move(w);
  result.train_accuracy = result.log.back().accuracy;
  return result;
}

inline TrainResult train(const DatasetManifest& manifest, const TrainConfig& config) {
  std::vector<LabeledEmbedding> data;
  data.reserve(manifest.records.size());
  for (const auto& r : manifest.records) data.push_back({r.embedding, r.label});
  return train(data, config);
}

// ---------------------------------------------------------------------------
// Weights file: {"dimension", "weights", "bias", "train_config", "train_accuracy"}
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"optimizer", "adam"},        {"seed", c.seed},                   {"beta1", c.beta1},
          {"beta2", c.beta2},           {"epsilon", c.epsilon}};
}

inline nlohmann::json weights_to_json(const TrainResult& r, const TrainConfig& c) {
  return {{"dimension", r.weights.dimension()},
          {"weights", r.weights.weights},
          {"bias", r.weights.bias},
          {"train_config", to_json(c)},
          {"train_accuracy", r.train_accuracy}};
}

inline nlohmann::json training_log_to_json(const TrainResult& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : r.log) rows.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
  return rows;
}

inline ClassifierWeights weights_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("weights") || !j.contains("bias") || !j.contains("dimension")) {
    throw ValidationError("weights file must contain dimension, weights and bias");
  }
  ClassifierWeights w;
  try {
    w.weights = j["weights"].get<std::vector<double>>();
    w.bias = j["bias"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed weights file: ") + e.what());
  }
  const auto dim = j["dimension"].get<std::size_t>();
  if (w.weights.size() != dim) throw DimensionError(dim, w.weights.size(), "weights file");
  for (double x : w.weights) {
    if (!std::isfinite(x)) throw ValidationError("weights file contains a non-finite weight");
  }
  if (!std::isfinite(w.bias)) throw ValidationError("weights file contains a non-finite bias");
  return w;
}

inline ClassifierWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open weights file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed weights file: ") + e.what());
  }
  return weights_from_json(j);
}

}  // namespace dex

#endif  // DEX_CLASSIFIER_HPP
