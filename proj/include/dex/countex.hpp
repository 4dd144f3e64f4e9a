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

// Concept-weight optimization baseline over a fixed concept library.
//
// The counterfactual is x_hat = x + sum_c w_c e_c and the weights minimize
//
//   CE(f(x_hat), public) + l_id * ||sum_c w_c e_c||^2 + l1 * ||w||_1 + l2 * ||w||^2
//
// by plain gradient descent from a seeded Xavier-uniform start, stopping at
// the first iterate whose prediction is no longer private.

#ifndef DEX_COUNTEX_HPP
#define DEX_COUNTEX_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dex/arithmetic.hpp"
#include "dex/classifier.hpp"
#include "dex/core.hpp"
#include "dex/providers.hpp"
#include "dex/random.hpp"

namespace dex {

struct ConceptLibrary {
  std::vector<std::string> concepts;
  std::vector<EmbeddingVector> directions;  // unit norm, one per concept

  std::size_t size() const { return concepts.size(); }

  void validate() const {
    if (concepts.empty()) throw ValidationError("concept library is empty");
    if (concepts.size() != directions.size()) throw ValidationError("concept library is missing directions");
    std::set<std::string> seen(concepts.begin(), concepts.end());
    if (seen.size() != concepts.size()) throw ValidationError("concept library contains duplicates");
    for (const auto& d : directions) {
      if (std::abs(l2_norm(d) - 1.0) > 1e-9) throw ValidationError("concept direction is not unit norm");
    }
  }
};

inline ConceptLibrary build_concept_library(const Provider& provider, const std::vector<std::string>& concepts) {
  ConceptLibrary lib;
  lib.concepts = canonicalize_tags(concepts);
  if (lib.concepts.size() != concepts.size()) throw ValidationError("concept library contains duplicates");
  for (const auto& c : lib.concepts) lib.directions.push_back(concept_direction(provider, Scenario({c})).direction);
  lib.validate();
  return lib;
}

enum class SparsityComparison { kSigned, kAbsolute };
enum class ConceptRanking { kMostNegative, kMostPositive };

struct CountexConfig {
  double learning_rate = 1e-2;
  int max_iterations = 100;
  double lambda_identity = 0.1;
  double lambda_l1 = 0.1;
  double lambda_l2 = 0.1;
  double weight_threshold = 0.1;
  std::uint64_t seed = 0;
  SparsityComparison sparsity_comparison = SparsityComparison::kSigned;
  ConceptRanking ranking = ConceptRanking::kMostNegative;

  void validate() const {
    if (!(learning_rate > 0.0) || max_iterations < 0) throw ValidationError("invalid optimizer settings");
    if (lambda_identity < 0.0 || lambda_l1 < 0.0 || lambda_l2 < 0.0) {
      throw ValidationError("regularization weights must be non-negative");
    }
    if (weight_threshold < 0.0) throw ValidationError("weight threshold must be non-negative");
  }
};

struct CountexLosses {
  double cross_entropy = 0.0;
  double identity = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

struct CountexSolution {
  std::vector<double> weights;
  EmbeddingVector counterfactual_embedding;
  bool flipped = false;
  int iterations_used = 0;
  PrivacyLabel predicted_label = PrivacyLabel::kPrivate;
  double confidence = 0.5;
  CountexLosses final_losses;
  // Cross-entropy term at every evaluated iterate.
  std::vector<double> cross_entropy_history;
};

// sum_c w_c e_c
inline EmbeddingVector concept_offset(const ConceptLibrary& lib, const std::vector<double>& w) {
  EmbeddingVector offset = EmbeddingVector::zeros(lib.directions.front().size());
  for (std::size_t c = 0; c < lib.size(); ++c) offset += lib.directions[c] * w[c];
  return offset;
}

struct CountexObjective {
  CountexLosses losses;
  std::vector<double> grad_w;
};

// Loss terms and the gradient with respect to w. The L1 subgradient at 0 is 0.
inline CountexObjective countex_objective(const EmbeddingVector& x, const ClassifierWeights& clf,
                                          const ConceptLibrary& lib, const std::vector<double>& w,
                                          const CountexConfig& config) {
  if (w.size() != lib.size()) throw DimensionError(lib.size(), w.size(), "concept weights");
  const EmbeddingVector offset = concept_offset(lib, w);
  const LossAndGradient ce = loss_and_gradient(clf, x + offset, PrivacyLabel::kPublic);

  CountexObjective out;
  out.losses.cross_entropy = ce.loss;
  out.losses.identity = config.lambda_identity * dot(offset, offset);
  for (double wc : w) {
    out.losses.l1 += std::abs(wc);
    out.losses.l2 += wc * wc;
  }
  out.losses.l1 *= config.lambda_l1;
  out.losses.l2 *= config.lambda_l2;
  out.losses.total = out.losses.cross_entropy + out.losses.identity + out.losses.l1 + out.losses.l2;

  out.grad_w.resize(w.size());
  for (std::size_t c = 0; c < w.size(); ++c) {
    const EmbeddingVector& e = lib.directions[c];
    const double sign = w[c] > 0.0 ? 1.0 : (w[c] < 0.0 ? -1.0 : 0.0);
    out.grad_w[c] = dot(e, ce.grad_x) + 2.0 * config.lambda_identity * dot(e, offset) + config.lambda_l1 * sign +
                    2.0 * config.lambda_l2 * w[c];
  }
  return out;
}

inline std::vector<double> xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Rng rng(seed);
  std::vector<double> w(fan_in * fan_out);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return w;
}

inline CountexSolution optimize(const EmbeddingVector& x, const ClassifierWeights& clf, const ConceptLibrary& lib,
                                const CountexConfig& config) {
  config.validate();
  lib.validate();
  x.require_size(clf.dimension(), "baseline input");
  if (predict(clf, x).label != PrivacyLabel::kPrivate) {
    throw ValidationError("baseline input must be classified private");
  }

  CountexSolution s;
  s.weights = xavier_uniform(lib.size(), 1, config.seed);
  for (int it = 0;; ++it) {
    s.counterfactual_embedding = x + concept_offset(lib, s.weights);
    const Prediction p = predict(clf, s.counterfactual_embedding);
    s.predicted_label = p.label;
    s.confidence = p.confidence;
    const CountexObjective obj = countex_objective(x, clf, lib, s.weights, config);
    if (!std::isfinite(obj.losses.total)) throw DivergenceError("baseline optimization", "iteration", it);
    s.final_losses = obj.losses;
    s.cross_entropy_history.push_back(obj.losses.cross_entropy);
    s.iterations_used = it;
    if (p.label != PrivacyLabel::kPrivate) {
      s.flipped = true;
      break;
    }
    if (it == config.max_iterations) break;
    for (std::size_t c = 0; c < s.weights.size(); ++c) s.weights[c] -= config.learning_rate * obj.grad_w[c];
  }
  return s;
}

struct TopConcepts {
  std::vector<std::pair<std::string, double>> concepts;
  bool truncated = false;   // k exceeded the library size
  bool degenerate = false;  // some selected weight does not have the ranked sign
};

// The k concepts whose weights best explain the private class: most negative
// first by default. Ties keep library order.
inline TopConcepts top_k_concepts(const CountexSolution& s, const ConceptLibrary& lib, std::size_t k,
                                  ConceptRanking ranking = ConceptRanking::kMostNegative) {
  TopConcepts out;
  if (k > lib.size()) {
    k = lib.size();
    out.truncated = true;
  }
  std::vector<std::size_t> order(lib.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranking == ConceptRanking::kMostNegative ? s.weights[a] < s.weights[b] : s.weights[a] > s.weights[b];
  });
  for (std::size_t i = 0; i < k; ++i) {
    const double w = s.weights[order[i]];
    if (ranking == ConceptRanking::kMostNegative ? !(w < 0.0) : !(w > 0.0)) out.degenerate = true;
    out.concepts.emplace_back(lib.concepts[order[i]], w);
  }
  return out;
}

// Number of weights above the threshold (strict); signed by default.
inline std::size_t countex_sparsity(const CountexSolution& s, const CountexConfig& config) {
  return static_cast<std::size_t>(std::count_if(s.weights.begin(), s.weights.end(), [&](double w) {
    return (config.sparsity_comparison == SparsityComparison::kAbsolute ? std::abs(w) : w) > config.weight_threshold;
  }));
}

// Explanation set of a baseline run: a single explanation made of the top-k
// concepts when the prediction flipped, nothing otherwise.
inline ExplanationSet countex_explanation(const std::string& image_id, const EmbeddingVector& x,
                                          const ClassifierWeights& clf, const ConceptLibrary& lib,
                                          const CountexSolution& s, const CountexConfig& config, std::size_t k) {
  ExplanationSet out;
  out.image_id = image_id;
  const Prediction original = predict(clf, x);
  out.original_label = original.label;
  out.original_confidence = original.confidence;
  const TopConcepts top = top_k_concepts(s, lib, k, config.ranking);
  if (top.concepts.empty()) {
    out.status = s.flipped ? ExplanationStatus::kNoScenarios : ExplanationStatus::kNoValid;
    return out;
  }
  std::vector<std::string> names;
  for (const auto& [name, w] : top.concepts) names.push_back(name);
  Candidate c;
  c.scenario = Scenario(names);
  c.counterfactual_embedding = s.counterfactual_embedding;
  c.predicted_label = s.predicted_label;
  c.confidence = s.confidence;
  c.proximity = try_cosine_similarity(x, s.counterfactual_embedding).value_or(0.0);
  c.concept_count = countex_sparsity(s, config);
  out.candidates_all.push_back(c);
  if (s.flipped) {
    out.status = ExplanationStatus::kExplained;
    out.candidates_valid = out.pareto = out.best = {c};
  } else {
    out.status = ExplanationStatus::kNoValid;
  }
  if (top.degenerate) out.warnings.push_back("top concepts include weights without the ranked sign");
  return out;
}

inline nlohmann::json to_json(const CountexSolution& s, const ConceptLibrary& lib, const CountexConfig& config,
                              std::size_t k) {
  const TopConcepts top = top_k_concepts(s, lib, k, config.ranking);
  nlohmann::json top_json = nlohmann::json::array();
  for (const auto& [name, w] : top.concepts) top_json.push_back({{"concept", name}, {"weight", w}});
  return {{"weights", s.weights},
          {"flipped", s.flipped},
          {"iterations", s.iterations_used},
          {"predicted_label", std::string(to_string(s.predicted_label))},
          {"confidence", s.confidence},
          {"losses",
           {{"cross_entropy", s.final_losses.cross_entropy},
            {"identity", s.final_losses.identity},
            {"l1", s.final_losses.l1},
            {"l2", s.final_losses.l2},
            {"total", s.final_losses.total}}},
          {"sparsity", countex_sparsity(s, config)},
          {"top_k", top_json},
          {"top_k_truncated", top.truncated},
          {"top_k_degenerate", top.degenerate}};
}

}  // namespace dex

#endif  // DEX_COUNTEX_HPP
