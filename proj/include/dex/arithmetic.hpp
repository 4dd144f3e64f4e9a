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

#ifndef DEX_ARITHMETIC_HPP
#define DEX_ARITHMETIC_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dex/core.hpp"
#include "dex/providers.hpp"

namespace dex {

// How a multi-tag scenario becomes one direction.
enum class DirectionMode {
  kJoinedPrompt,  // one prompt "t1, t2, t3" minus the anchor
  kPerTagSum,     // sum over tags of (tag prompt minus anchor)
};

struct ConceptDirection {
  Scenario scenario;
  EmbeddingVector direction;  // unit L2 norm
};

inline EmbeddingVector normalized(const EmbeddingVector& raw, const std::string& what) {
  const double norm = l2_norm(raw);
  if (norm == 0.0) throw DegenerateDirectionError("zero direction for '" + what + "'");
  return raw * (1.0 / norm);
}

// Unit vector from the anchor prompt's embedding to the scenario prompt's.
inline ConceptDirection concept_direction(const Provider& provider, const Scenario& scenario,
                                          DirectionMode mode = DirectionMode::kJoinedPrompt) {
  const EmbeddingVector anchor = provider.embed_anchor();
  EmbeddingVector raw = EmbeddingVector::zeros(anchor.size());
  if (mode == DirectionMode::kJoinedPrompt) {
    raw = provider.embed_text(scenario.prompt()) - anchor;
  } else {
    for (const auto& tag : scenario.tags()) raw += provider.embed_text(tag) - anchor;
  }
  return {scenario, normalized(raw, scenario.prompt())};
}

// x_hat = x - e_c. No renormalization.
inline EmbeddingVector apply_counterfactual(const EmbeddingVector& x, const ConceptDirection& dir) {
  x.require_size(dir.direction.size(), "counterfactual");
  return x - dir.direction;
}

// Inverse of apply_counterfactual.
inline EmbeddingVector add_concept(const EmbeddingVector& x, const ConceptDirection& dir) {
  x.require_size(dir.direction.size(), "concept addition");
  return x + dir.direction;
}

// ---------------------------------------------------------------------------
// Compositionality probes
// ---------------------------------------------------------------------------

struct ProbeItem {
  std::vector<std::string> phrases;
  std::string role;
  std::optional<double> before;
  std::optional<double> after;
  // Cosine similarity for linearity items, after - before for edit items.
  std::optional<double> value;
};

struct ProbeReport {
  std::string kind;
  std::string image_id;
  std::vector<ProbeItem> items;
  std::size_t count = 0;  // items with a defined value
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

namespace detail {

inline void summarize(ProbeReport& report) {
  double sum = 0.0;
  report.count = 0;
  for (const auto& item : report.items) {
    if (item.value) {
      sum += *item.value;
      ++report.count;
    }
  }
  if (report.count == 0) return;
  report.mean = sum / static_cast<double>(report.count);
  double sq = 0.0;
  for (const auto& item : report.items) {
    if (item.value) sq += (*item.value - report.mean) * (*item.value - report.mean);
  }
  report.std = std::sqrt(sq / static_cast<double>(report.count));
}

}  // namespace detail

// For each phrase group compares the embedding of the joined prompt with the
// sum of the individual phrase embeddings. Groups of two are pairs, three are
// triplets; any size >= 2 is accepted.
inline ProbeReport linearity_probe(const Provider& provider, const std::vector<std::vector<std::string>>& groups) {
  if (groups.empty()) throw ValidationError("linearity probe needs at least one phrase group");
  ProbeReport report;
  report.kind = "linearity";
  for (const auto& group : groups) {
    if (group.size() < 2) throw ValidationError("linearity probe groups need at least two phrases");
    ProbeItem item;
    item.phrases = group;
    item.role = group.size() == 2 ? "pair" : group.size() == 3 ? "triplet" : "group";
    const EmbeddingVector joined = provider.embed_text(join_phrases(group));
    EmbeddingVector sum = EmbeddingVector::zeros(joined.size());
    for (const auto& phrase : group) sum += provider.embed_text(phrase);
    item.value = try_cosine_similarity(joined, sum);
    report.items.push_back(std::move(item));
  }
  detail::summarize(report);
  return report;
}

// Adds and removes single-concept directions to an image embedding and
// reports how image-concept similarities move. Reference concepts found among
// the image's detected tags are reported as "related", others as "unrelated".
inline ProbeReport add_remove_probe(const Provider& provider, const std::string& image_id,
                                    const std::vector<std::string>& add, const std::vector<std::string>& remove,
                                    const std::vector<std::string>& reference_concepts) {
  const EmbeddingVector x = provider.embed_image(image_id);
  EmbeddingVector edited = x;
  for (const auto& c : add) edited = add_concept(edited, concept_direction(provider, Scenario({c})));
  for (const auto& c : remove) edited = apply_counterfactual(edited, concept_direction(provider, Scenario({c})));

  const auto detected = provider.detect_tags(image_id);
  ProbeReport report;
  report.kind = "add_remove";
  report.image_id = image_id;
  auto evaluate = [&](const std::string& concept_text, std::string role) {
    ProbeItem item;
    item.phrases = {canonicalize_tag(concept_text)};
    item.role = std::move(role);
    const EmbeddingVector t = provider.embed_text(concept_text);
    item.before = try_cosine_similarity(x, t);
    item.after = try_cosine_similarity(edited, t);
    if (item.before && item.after) item.value = *item.after - *item.before;
    report.items.push_back(std::move(item));
  };
  for (const auto& c : add) evaluate(c, "added");
  for (const auto& c : remove) evaluate(c, "removed");
  for (const auto& c : reference_concepts) {
    const bool related = std::find(detected.begin(), detected.end(), canonicalize_tag(c)) != detected.end();
    evaluate(c, related ? "related" : "unrelated");
  }
  detail::summarize(report);
  return report;
}

inline nlohmann::json to_json(const ProbeReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : r.items) {
    items.push_back({{"phrases", item.phrases},
                     {"role", item.role},
                     {"before", opt(item.before)},
                     {"after", opt(item.after)},
                     {"value", opt(item.value)}});
  }
  nlohmann::json j{{"kind", r.kind}, {"items", items}, {"count", r.count}, {"mean", r.mean}, {"std", r.std}};
  if (!r.image_id.empty()) j["image_id"] = r.image_id;
  return j;
}

}  // namespace dex

#endif  // DEX_ARITHMETIC_HPP
