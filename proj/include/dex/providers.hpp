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

#ifndef DEX_PROVIDERS_HPP
#define DEX_PROVIDERS_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dex/core.hpp"
#include "dex/manifest.hpp"
#include "dex/random.hpp"

namespace dex {

enum class ProviderKind { kManifest, kSynthetic, kRemote };

inline std::string_view to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::kManifest: return "manifest";
    case ProviderKind::kSynthetic: return "synthetic";
    case ProviderKind::kRemote: return "remote";
  }
  return "unknown";
}

inline ProviderKind parse_provider_kind(std::string_view text) {
  if (text == "manifest") return ProviderKind::kManifest;
  if (text == "synthetic") return ProviderKind::kSynthetic;
  if (text == "remote") return ProviderKind::kRemote;
  throw ValidationError("unknown provider kind '" + std::string(text) + "'");
}

inline constexpr std::string_view kDefaultAnchorPrompt = "a photo of object";
inline constexpr std::string_view kDefaultInstructionPrompt = "Describe this image as detailed as possible";

struct ProviderConfig {
  ProviderKind kind = ProviderKind::kSynthetic;
  std::string anchor_prompt{kDefaultAnchorPrompt};
  std::string instruction_prompt{kDefaultInstructionPrompt};
  std::uint64_t seed = 0;
  // Synthetic only: magnitude of the per-image residual added to embed_image.
  double residual_magnitude = 0.0;
  // Remote only.
  std::string endpoint;
  std::filesystem::path image_dir;
  int timeout_ms = 30000;
  int max_retries = 2;
  int max_in_flight = 4;

  void validate() const {
    if (anchor_prompt.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw ValidationError("anchor prompt must be non-empty");
    }
    if (residual_magnitude < 0.0 || !std::isfinite(residual_magnitude)) {
      throw ValidationError("residual magnitude must be a non-negative finite number");
    }
    if (kind == ProviderKind::kRemote && endpoint.empty()) {
      throw ValidationError("remote provider requires an endpoint");
    }
  }
};

// Source of text embeddings, image embeddings and tags. Implementations are
// read-only after construction and safe to call concurrently.
class Provider {
 public:
  explicit Provider(ProviderConfig config) : config_(std::move(config)) { config_.validate(); }
  virtual ~Provider() = default;
  Provider(const Provider&) = delete;
  Provider& operator=(const Provider&) = delete;

  const ProviderConfig& config() const { return config_; }

  virtual std::size_t dimension() const = 0;
  virtual EmbeddingVector embed_text(const std::string& text) const = 0;
  virtual EmbeddingVector embed_image(const std::string& image_id) const = 0;
  virtual std::vector<std::string> detect_tags(const std::string& image_id) const = 0;

  virtual std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
  }

  EmbeddingVector embed_anchor() const { return embed_text(config_.anchor_prompt); }

 protected:
  static void require_text(const std::string& text) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw ValidationError("text embedding request must be non-empty");
    }
  }

 private:
  ProviderConfig config_;
};

// Splits a prompt on ", " into canonical phrases, dropping repeats.
inline std::vector<std::string> split_phrases(const std::string& text) {
  std::vector<std::string> raw;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(", ", start);
    raw.push_back(text.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 2;
  }
  return canonicalize_tags(raw);
}

// Joins phrases with ", ", the prompt convention for composite concepts.
inline std::string join_phrases(const std::vector<std::string>& phrases) {
  std::string out;
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (i > 0) out += ", ";
    out += phrases[i];
  }
  return out;
}

// Exactly additive stand-in for a joint text/image encoder. Each canonical
// phrase owns a seeded unit vector; a prompt embeds to the sum over its
// distinct phrases and the anchor prompt embeds to zero. Image embeddings are
// the sum over the record's extracted tags plus an optional seeded residual.
class SyntheticProvider final : public Provider {
 public:
  SyntheticProvider(ProviderConfig config, std::size_t dimension,
                    std::shared_ptr<const DatasetManifest> manifest = nullptr)
      : Provider(std::move(config)),
        dimension_(dimension),
        manifest_(std::move(manifest)),
        anchor_(canonicalize_tag(this->config().anchor_prompt)) {
    if (dimension_ == 0) throw ValidationError("synthetic provider dimension must be positive");
  }

  std::size_t dimension() const override { return dimension_; }

  // Unit vector owned by one canonical phrase; zero for the anchor.
  EmbeddingVector phrase_vector(const std::string& canonical_phrase) const {
    if (canonical_phrase == anchor_) return EmbeddingVector::zeros(dimension_);
    Rng rng(derive_seed(config().seed, "phrase:" + canonical_phrase));
    return EmbeddingVector(unit_gaussian(rng, dimension_));
  }

  EmbeddingVector embed_text(const std::string& text) const override {
    require_text(text);
    if (canonicalize_tag(text) == anchor_) return EmbeddingVector::zeros(dimension_);
    return sum_of_phrases(split_phrases(text));
  }

  EmbeddingVector embed_image(const std::string& image_id) const override {
    const ImageRecord& r = record(image_id);
    EmbeddingVector x = sum_of_phrases(r.extracted_tags);
    if (config().residual_magnitude > 0.0) {
      Rng rng(derive_seed(config().seed, "residual:" + image_id));
      x += EmbeddingVector(unit_gaussian(rng, dimension_)) * config().residual_magnitude;
    }
    return x;
  }

  // Stored detections when present, otherwise the extracted tags.
  std::vector<std::string> detect_tags(const std::string& image_id) const override {
    const ImageRecord& r = record(image_id);
    return r.detected_tags.empty() ? r.extracted_tags : r.detected_tags;
  }

 private:
  EmbeddingVector sum_of_phrases(const std::vector<std::string>& phrases) const {
    EmbeddingVector sum = EmbeddingVector::zeros(dimension_);
    for (const auto& p : phrases) sum += phrase_vector(p);
    return sum;
  }

  const ImageRecord& record(const std::string& id) const {
    if (!manifest_) throw MissingRecordError(id);
    return manifest_->at(id);
  }

  std::size_t dimension_;
  std::shared_ptr<const DatasetManifest> manifest_;
  std::string anchor_;
};

// Serves everything from precomputed data: image embeddings and tags from the
// manifest, text embeddings from a text table keyed by canonical text.
class ManifestProvider final : public Provider {
 public:
  ManifestProvider(ProviderConfig config, std::shared_ptr<const DatasetManifest> manifest,
                   std::optional<TextEmbeddingTable> text_table = std::nullopt)
      : Provider(std::move(config)), manifest_(std::move(manifest)), text_table_(std::move(text_table)) {
    if (!manifest_) throw ValidationError("manifest provider requires a manifest");
    if (text_table_ && text_table_->dimension != manifest_->dimension) {
      throw DimensionError(manifest_->dimension, text_table_->dimension, "text embedding table");
    }
  }

  std::size_t dimension() const override { return manifest_->dimension; }

  EmbeddingVector embed_text(const std::string& text) const override {
    require_text(text);
    const std::string key = canonicalize_tag(text);
    if (!text_table_) throw MissingEmbeddingError(key);
    auto it = text_table_->entries.find(key);
    if (it == text_table_->entries.end()) throw MissingEmbeddingError(key);
    return it->second;
  }

  EmbeddingVector embed_image(const std::string& image_id) const override {
    return manifest_->at(image_id).embedding;
  }

  std::vector<std::string> detect_tags(const std::string& image_id) const override {
    return manifest_->at(image_id).detected_tags;
  }

 private:
  std::shared_ptr<const DatasetManifest> manifest_;
  std::optional<TextEmbeddingTable> text_table_;
};

}  // namespace dex

#endif  // DEX_PROVIDERS_HPP
