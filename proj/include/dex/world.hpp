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

// Generated datasets for end-to-end runs without real images. Every image
// draws a handful of tags from a fixed vocabulary; a chosen fraction also
// carries the marker tag and is labeled private. Embeddings come from the
// synthetic provider, so the world is exactly additive.

#ifndef DEX_WORLD_HPP
#define DEX_WORLD_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dex/core.hpp"
#include "dex/providers.hpp"
#include "dex/random.hpp"

namespace dex {

struct WorldConfig {
  std::size_t dimension = 32;
  std::size_t images = 200;
  // Vocabulary plus marker should not exceed the dimension: the concept
  // vectors are then linearly independent and the marker is separable from
  // every combination of the other tags.
  std::size_t vocabulary = 20;
  std::size_t min_tags = 2;
  std::size_t max_tags = 4;
  double private_fraction = 0.5;
  std::string marker = "secret";
  double residual_magnitude = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (dimension == 0 || images == 0) throw ValidationError("world needs a positive dimension and image count");
    if (min_tags == 0 || min_tags > max_tags) throw ValidationError("world tag counts must satisfy 1 <= min <= max");
    if (max_tags > vocabulary) throw ValidationError("world vocabulary is smaller than max_tags");
    if (private_fraction < 0.0 || private_fraction > 1.0) throw ValidationError("private fraction must lie in [0, 1]");
  }
};

inline std::vector<std::string> world_vocabulary(std::size_t size) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < size; ++i) out.push_back("concept " + std::to_string(i));
  return out;
}

// Provider configuration under which `generate_world` computed the embeddings.
inline ProviderConfig world_provider_config(const WorldConfig& config) {
  ProviderConfig p;
  p.kind = ProviderKind::kSynthetic;
  p.seed = config.seed;
  p.residual_magnitude = config.residual_magnitude;
  return p;
}

inline DatasetManifest generate_world(const WorldConfig& config) {
  config.validate();
  const std::vector<std::string> vocab = world_vocabulary(config.vocabulary);
  Rng rng(derive_seed(config.seed, "world"));

  auto manifest = std::make_shared<DatasetManifest>();
  manifest->name = "synthetic-world";
  manifest->dimension = config.dimension;
  const auto n_private =
      static_cast<std::size_t>(config.private_fraction * static_cast<double>(config.images) + 0.5);
  for (std::size_t i = 0; i < config.images; ++i) {
    ImageRecord r;
    r.id = "img" + std::to_string(i);
    std::vector<std::string> pool = vocab;
    rng.shuffle(pool);
    const std::size_t k = config.min_tags + rng.below(config.max_tags - config.min_tags + 1);
    r.extracted_tags.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    r.label = i < n_private ? PrivacyLabel::kPrivate : PrivacyLabel::kPublic;
    if (r.label == PrivacyLabel::kPrivate) r.extracted_tags.push_back(config.marker);
    r.detected_tags = r.extracted_tags;
    r.embedding = EmbeddingVector::zeros(config.dimension);
    manifest->records.push_back(std::move(r));
  }
  // Interleave the classes so that file order carries no label information.
  rng.shuffle(manifest->records);

  std::vector<std::string> library = vocab;
  library.push_back(config.marker);
  manifest->concept_library = library;
  manifest->validate_and_index();

  const SyntheticProvider provider(world_provider_config(config), config.dimension, manifest);
  for (auto& r : manifest->records) r.embedding = provider.embed_image(r.id);
  manifest->validate_and_index();
  return std::move(*manifest);
}

}  // namespace dex

#endif  // DEX_WORLD_HPP
