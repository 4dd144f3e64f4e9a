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

#ifndef DEX_CORE_HPP
#define DEX_CORE_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dex/errors.hpp"

namespace dex {

// ---------------------------------------------------------------------------
// EmbeddingVector
// ---------------------------------------------------------------------------

// A point in the joint image/text embedding space. Entries are always finite.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) { check_finite(); }
  EmbeddingVector(std::initializer_list<double> values) : values_(values) { check_finite(); }

  static EmbeddingVector zeros(std::size_t dimension) {
    return EmbeddingVector(std::vector<double>(dimension, 0.0));
  }

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& raw() const { return values_; }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool operator==(const EmbeddingVector&) const = default;

  EmbeddingVector& operator+=(const EmbeddingVector& other) {
    require_same_size(other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }
  EmbeddingVector& operator-=(const EmbeddingVector& other) {
    require_same_size(other);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
  }
  EmbeddingVector& operator*=(double scale) {
    for (double& v : values_) v *= scale;
    check_finite();
    return *this;
  }

  friend EmbeddingVector operator+(EmbeddingVector a, const EmbeddingVector& b) { return a += b; }
  friend EmbeddingVector operator-(EmbeddingVector a, const EmbeddingVector& b) { return a -= b; }
  friend EmbeddingVector operator*(EmbeddingVector a, double s) { return a *= s; }
  friend EmbeddingVector operator*(double s, EmbeddingVector a) { return a *= s; }

  void require_size(std::size_t dimension, const std::string& where = "") const {
    if (values_.size() != dimension) throw DimensionError(dimension, values_.size(), where);
  }

 private:
  void require_same_size(const EmbeddingVector& other) const { other.require_size(values_.size()); }
  void check_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) throw ValidationError("embedding contains a non-finite value");
    }
  }

  std::vector<double> values_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError(a.size(), b.size(), "dot product");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  return dot(a.values(), b.values());
}

inline double l2_norm(const EmbeddingVector& v) { return std::sqrt(dot(v, v)); }

// Cosine similarity. Throws DegenerateVectorError when either side has zero norm.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateVectorError("cosine similarity of a zero-norm vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline std::optional<double> try_cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (l2_norm(a) == 0.0 || l2_norm(b) == 0.0) return std::nullopt;
  return cosine_similarity(a, b);
}

// Shortest decimal text that reads back to the same double.
inline std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

enum class PrivacyLabel { kPrivate, kPublic };

inline std::string_view to_string(PrivacyLabel label) {
  return label == PrivacyLabel::kPrivate ? "pr" : "pu";
}

inline PrivacyLabel parse_label(std::string_view text) {
  if (text == "pr") return PrivacyLabel::kPrivate;
  if (text == "pu") return PrivacyLabel::kPublic;
  throw ValidationError("unknown privacy label '" + std::string(text) + "' (expected pr or pu)");
}

inline PrivacyLabel opposite(PrivacyLabel label) {
  return label == PrivacyLabel::kPrivate ? PrivacyLabel::kPublic : PrivacyLabel::kPrivate;
}

// ---------------------------------------------------------------------------
// Tags
// ---------------------------------------------------------------------------

// Lowercases, trims, and collapses internal whitespace runs to one space.
inline std::string canonicalize_tag(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  if (out.empty()) throw TagError("empty tag after canonicalization");
  return out;
}

// Canonicalizes every tag and drops later duplicates, keeping first-seen order.
inline std::vector<std::string> canonicalize_tags(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  out.reserve(raw.size());
  for (const auto& tag : raw) {
    std::string canonical = canonicalize_tag(tag);
    if (std::find(out.begin(), out.end(), canonical) == out.end()) out.push_back(std::move(canonical));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records and manifest
// ---------------------------------------------------------------------------

struct ImageRecord {
  std::string id;
  PrivacyLabel label = PrivacyLabel::kPublic;
  EmbeddingVector embedding;
  std::vector<std::string> extracted_tags;
  std::vector<std::string> detected_tags;
  std::optional<std::string> description;

  bool operator==(const ImageRecord&) const = default;
};

struct DatasetManifest {
  std::string name;
  std::size_t dimension = 0;
  std::vector<ImageRecord> records;
  std::optional<std::vector<std::string>> concept_library;

  bool operator==(const DatasetManifest& other) const {
    return name == other.name && dimension == other.dimension && records == other.records &&
           concept_library == other.concept_library;
  }

  // Builds the id index and enforces the manifest invariants.
  void validate_and_index() {
    if (dimension == 0) throw ValidationError("manifest dimension must be positive");
    index_.clear();
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (r.embedding.size() != dimension) {
        throw ParseError(i, "embedding",
                         "dimension mismatch: expected " + std::to_string(dimension) + ", got " +
                             std::to_string(r.embedding.size()));
      }
      if (!index_.emplace(r.id, i).second) throw ParseError(i, "id", "duplicate id '" + r.id + "'");
    }
  }

  const ImageRecord* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records[it->second];
  }

  const ImageRecord& at(const std::string& id) const {
    const ImageRecord* r = find(id);
    if (r == nullptr) throw MissingRecordError(id);
    return *r;
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Scenario / Candidate / ExplanationSet
// ---------------------------------------------------------------------------

// A duplicate-free, lexicographically sorted set of canonical tags. Two
// scenarios with the same tags in a different order are the same scenario.
class Scenario {
 public:
  Scenario() = default;

  explicit Scenario(std::vector<std::string> tags) : tags_(std::move(tags)) {
    if (tags_.empty()) throw ValidationError("scenario must contain at least one tag");
    for (auto& t : tags_) t = canonicalize_tag(t);
    std::sort(tags_.begin(), tags_.end());
    if (std::adjacent_find(tags_.begin(), tags_.end()) != tags_.end()) {
      throw ValidationError("scenario contains duplicate tags");
    }
  }

  const std::vector<std::string>& tags() const { return tags_; }
  std::size_t size() const { return tags_.size(); }

  // The text prompt: tags joined by ", ".
  std::string prompt() const {
    std::string out;
    for (std::size_t i = 0; i < tags_.size(); ++i) {
      if (i > 0) out += ", ";
      out += tags_[i];
    }
    return out;
  }

  bool operator==(const Scenario&) const = default;
  auto operator<=>(const Scenario& other) const {
    if (tags_.size() != other.tags_.size()) return tags_.size() <=> other.tags_.size();
    return tags_ <=> other.tags_;
  }

 private:
  std::vector<std::string> tags_;
};

struct Candidate {
  Scenario scenario;
  EmbeddingVector counterfactual_embedding;
  PrivacyLabel predicted_label = PrivacyLabel::kPrivate;
  // Probability the classifier assigns to predicted_label.
  double confidence = 0.5;
  // cos(original embedding, counterfactual_embedding).
  double proximity = 0.0;
  // Number of concepts used to build the counterfactual (sparsity term g).
  // Equals scenario.size() for scenario-based candidates.
  std::size_t concept_count = 0;

  bool operator==(const Candidate&) const = default;
};

enum class ExplanationStatus { kExplained, kNoValid, kNoScenarios, kSkipped };

inline std::string_view to_string(ExplanationStatus status) {
  switch (status) {
    case ExplanationStatus::kExplained: return "explained";
    case ExplanationStatus::kNoValid: return "no-valid";
    case ExplanationStatus::kNoScenarios: return "no-scenarios";
    case ExplanationStatus::kSkipped: return "skipped";
  }
  return "unknown";
}

inline ExplanationStatus parse_explanation_status(std::string_view text) {
  if (text == "explained") return ExplanationStatus::kExplained;
  if (text == "no-valid") return ExplanationStatus::kNoValid;
  if (text == "no-scenarios") return ExplanationStatus::kNoScenarios;
  if (text == "skipped") return ExplanationStatus::kSkipped;
  throw ValidationError("unknown explanation status '" + std::string(text) + "'");
}

enum class SubsetMethod { kExact, kGreedy };

inline std::string_view to_string(SubsetMethod m) { return m == SubsetMethod::kExact ? "exact" : "greedy"; }

struct ExplanationSet {
  std::string image_id;
  ExplanationStatus status = ExplanationStatus::kSkipped;
  PrivacyLabel original_label = PrivacyLabel::kPrivate;
  double original_confidence = 0.5;
  std::vector<Candidate> candidates_all;
  std::vector<Candidate> candidates_valid;
  std::vector<Candidate> pareto;
  std::vector<Candidate> best;
  SubsetMethod subset_method = SubsetMethod::kExact;
  double subset_objective = 0.0;
  bool scenarios_truncated = false;
  std::vector<std::string> warnings;

  // Members of the diagnosed cohort (correctly classified private images).
  bool in_private_cohort() const { return status != ExplanationStatus::kSkipped; }

  bool operator==(const ExplanationSet&) const = default;
};

}  // namespace dex

#endif  // DEX_CORE_HPP
