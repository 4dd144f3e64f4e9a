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

#ifndef DEX_SELECTION_HPP
#define DEX_SELECTION_HPP

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dex/arithmetic.hpp"
#include "dex/classifier.hpp"
#include "dex/core.hpp"
#include "dex/providers.hpp"
#include "dex/scenarios.hpp"

namespace dex {

enum class Objective { kConfidence, kProximity };

inline std::string_view to_string(Objective o) { return o == Objective::kConfidence ? "confidence" : "proximity"; }

inline Objective parse_objective(std::string_view text) {
  if (text == "confidence") return Objective::kConfidence;
  if (text == "proximity") return Objective::kProximity;
  throw ValidationError("unknown objective '" + std::string(text) + "'");
}

struct SelectionConfig {
  std::vector<Objective> objectives{Objective::kConfidence, Objective::kProximity};
  std::size_t q = 3;
  std::size_t subset_exact_limit = 15;

  void validate() const {
    if (q < 1) throw ValidationError("q must be at least 1");
    if (objectives.size() < 2) throw ValidationError("selection needs at least two objectives");
  }
};

// All objectives are maximized.
using ObjectiveVector = std::vector<double>;

inline ObjectiveVector objectives_of(const Candidate& c, const std::vector<Objective>& objectives) {
  ObjectiveVector v;
  v.reserve(objectives.size());
  for (Objective o : objectives) v.push_back(o == Objective::kConfidence ? c.confidence : c.proximity);
  return v;
}

// Candidates whose prediction differs from the original one, in input order.
inline std::vector<Candidate> filter_valid(const Prediction& original, const std::vector<Candidate>& candidates) {
  std::vector<Candidate> out;
  for (const auto& c : candidates) {
    if (c.predicted_label != original.label) out.push_back(c);
  }
  return out;
}

// a dominates b: no worse everywhere and strictly better somewhere.
inline bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError(a.size(), b.size(), "objective vectors");
  bool strictly_better = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strictly_better = true;
  }
  return strictly_better;
}

// Indices of the non-dominated points, ascending. Points are visited in
// descending lexicographic order; a point can only be dominated by one visited
// earlier, and by transitivity it suffices to test against the front so far.
// Identical points never dominate each other and are all kept.
inline std::vector<std::size_t> pareto_front_indices(const std::vector<ObjectiveVector>& points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a] > points[b]; });
  std::vector<std::size_t> front;
  for (std::size_t i : order) {
    const bool dominated = std::any_of(front.begin(), front.end(),
                                       [&](std::size_t f) { return dominates(points[f], points[i]); });
    if (!dominated) front.push_back(i);
  }
  std::sort(front.begin(), front.end());
  return front;
}

inline std::vector<Candidate> pareto_front(const std::vector<Candidate>& candidates, const SelectionConfig& config) {
  std::vector<ObjectiveVector> points;
  points.reserve(candidates.size());
  for (const auto& c : candidates) points.push_back(objectives_of(c, config.objectives));
  std::vector<Candidate> out;
  for (std::size_t i : pareto_front_indices(points)) out.push_back(candidates[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Diverse subset
// ---------------------------------------------------------------------------

struct SubsetSelection {
  std::vector<std::size_t> indices;  // ascending
  // Sum over ordered pairs i != j of the similarity.
  double objective = 0.0;
  SubsetMethod method = SubsetMethod::kExact;
};

using SimilarityMatrix = std::vector<std::vector<double>>;

inline double subset_objective(const SimilarityMatrix& sim, const std::vector<std::size_t>& subset) {
  double total = 0.0;
  for (std::size_t a : subset) {
    for (std::size_t b : subset) {
      if (a != b) total += sim[a][b];
    }
  }
  return total;
}

// Exhaustive argmin over all size-q subsets; the first subset in
// lexicographic index order wins ties.
inline SubsetSelection exhaustive_subset(const SimilarityMatrix& sim, std::size_t q) {
  const std::size_t n = sim.size();
  SubsetSelection best;
  best.method = SubsetMethod::kExact;
  if (q >= n) {
    best.indices.resize(n);
    std::iota(best.indices.begin(), best.indices.end(), std::size_t{0});
    best.objective = subset_objective(sim, best.indices);
    return best;
  }
  std::vector<std::size_t> idx(q);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  best.objective = std::numeric_limits<double>::infinity();
  while (true) {
    const double value = subset_objective(sim, idx);
    if (value < best.objective) {
      best.objective = value;
      best.indices = idx;
    }
    std::size_t pos = q;
    while (pos > 0 && idx[pos - 1] == n - q + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < q; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

// Greedy farthest-point selection: start from the least similar pair, then
// repeatedly add the point with the smallest summed similarity to the chosen
// set. Lower indices win ties.
inline SubsetSelection greedy_subset(const SimilarityMatrix& sim, std::size_t q) {
  const std::size_t n = sim.size();
  if (q >= n || q < 2) return exhaustive_subset(sim, q);
  std::size_t first = 0;
  std::size_t second = 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (sim[i][j] < sim[first][second]) {
        first = i;
        second = j;
      }
    }
  }
  std::vector<std::size_t> chosen{first, second};
  std::vector<bool> taken(n, false);
  taken[first] = taken[second] = true;
  while (chosen.size() < q) {
    std::size_t pick = n;
    double pick_cost = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (taken[k]) continue;
      double cost = 0.0;
      for (std::size_t c : chosen) cost += sim[k][c];
      if (cost < pick_cost) {
        pick_cost = cost;
        pick = k;
      }
    }
    chosen.push_back(pick);
    taken[pick] = true;
  }
  std::sort(chosen.begin(), chosen.end());
  return {chosen, subset_objective(sim, chosen), SubsetMethod::kGreedy};
}

inline SubsetSelection select_diverse_indices(const SimilarityMatrix& sim, const SelectionConfig& config) {
  if (sim.size() <= config.subset_exact_limit) return exhaustive_subset(sim, config.q);
  return greedy_subset(sim, config.q);
}

inline SimilarityMatrix text_similarity_matrix(const std::vector<Candidate>& candidates, const Provider& text_provider) {
  std::vector<std::string> prompts;
  prompts.reserve(candidates.size());
  for (const auto& c : candidates) prompts.push_back(c.scenario.prompt());
  const auto vectors = text_provider.embed_texts(prompts);
  const std::size_t n = vectors.size();
  SimilarityMatrix sim(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) sim[i][j] = sim[j][i] = cosine_similarity(vectors[i], vectors[j]);
  }
  return sim;
}

struct DiverseSubset {
  std::vector<Candidate> candidates;
  double objective = 0.0;
  SubsetMethod method = SubsetMethod::kExact;
};

// Picks q members of the front with the least mutual text similarity of their
// scenario prompts. Fronts no larger than q are returned whole.
inline DiverseSubset select_diverse_subset(const std::vector<Candidate>& front, const Provider& text_provider,
                                           const SelectionConfig& config) {
  config.validate();
  DiverseSubset out;
  if (front.empty()) return out;
  const SubsetSelection s = select_diverse_indices(text_similarity_matrix(front, text_provider), config);
  for (std::size_t i : s.indices) out.candidates.push_back(front[i]);
  out.objective = s.objective;
  out.method = s.method;
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct ExplainOptions {
  ScenarioConfig scenarios;
  SelectionConfig selection;
  DirectionMode direction_mode = DirectionMode::kJoinedPrompt;
};

// Evaluates one scenario as a counterfactual of x.
inline Candidate evaluate_scenario(const EmbeddingVector& x, const ConceptDirection& dir,
                                   const ClassifierWeights& weights) {
  Candidate c;
  c.scenario = dir.scenario;
  c.counterfactual_embedding = apply_counterfactual(x, dir);
  const Prediction p = predict(weights, c.counterfactual_embedding);
  c.predicted_label = p.label;
  c.confidence = p.confidence;
  c.proximity = cosine_similarity(x, c.counterfactual_embedding);
  c.concept_count = dir.scenario.size();
  return c;
}

// Full explanation of one image: scenarios -> directions -> counterfactuals ->
// validity -> Pareto front -> diverse subset. Only correctly classified
// private images are explained; anything else comes back skipped.
// `text_provider`, when given, embeds scenario prompts for the subset step.
inline ExplanationSet explain_image(const ImageRecord& record, const ClassifierWeights& weights,
                                    const Provider& provider, const ExplainOptions& options,
                                    const Provider* text_provider = nullptr) {
  options.selection.validate();
  ExplanationSet out;
  out.image_id = record.id;
  const EmbeddingVector x = provider.embed_image(record.id);
  const Prediction original = predict(weights, x);
  out.original_label = original.label;
  out.original_confidence = original.confidence;
  if (record.label != PrivacyLabel::kPrivate || original.label != PrivacyLabel::kPrivate) {
    out.status = ExplanationStatus::kSkipped;
    return out;
  }

  const ScenarioSet scenarios = generate_scenarios(record.extracted_tags, options.scenarios);
  out.scenarios_truncated = scenarios.truncated();
  if (scenarios.status == ScenarioStatus::kNoScenarios) {
    out.status = ExplanationStatus::kNoScenarios;
    return out;
  }

  for (const auto& scenario : scenarios.scenarios) {
    try {
      const ConceptDirection dir = concept_direction(provider, scenario, options.direction_mode);
      out.candidates_all.push_back(evaluate_scenario(x, dir, weights));
    } catch (const DegenerateDirectionError& e) {
      out.warnings.push_back("dropped scenario '" + scenario.prompt() + "': " + e.what());
    } catch (const DegenerateVectorError& e) {
      out.warnings.push_back("dropped scenario '" + scenario.prompt() + "': " + e.what());
    }
  }

  out.candidates_valid = filter_valid(original, out.candidates_all);
  if (out.candidates_valid.empty()) {
    out.status = ExplanationStatus::kNoValid;
    return out;
  }
  out.status = ExplanationStatus::kExplained;
  out.pareto = pareto_front(out.candidates_valid, options.selection);
  DiverseSubset best = select_diverse_subset(out.pareto, text_provider ? *text_provider : provider, options.selection);
  out.best = std::move(best.candidates);
  out.subset_objective = best.objective;
  out.subset_method = best.method;
  return out;
}

}  // namespace dex

#endif  // DEX_SELECTION_HPP
