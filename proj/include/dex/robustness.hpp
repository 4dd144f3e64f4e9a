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

#ifndef DEX_ROBUSTNESS_HPP
#define DEX_ROBUSTNESS_HPP

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dex/classifier.hpp"
#include "dex/core.hpp"
#include "dex/random.hpp"

namespace dex {

enum class NoiseMode {
  kUnitNorm,  // Gaussian draw rescaled to unit L2 norm
  kSigma,     // raw N(0, sigma^2) per coordinate
};

struct RobustnessConfig {
  std::size_t num_vectors = 200;
  NoiseMode noise = NoiseMode::kUnitNorm;
  double sigma = 1.0;
  std::vector<double> thresholds{0.5, 0.6, 0.7, 0.8, 0.9};
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
      throw ValidationError("thresholds must be sorted ascending");
    }
    for (double t : thresholds) {
      if (t < 0.5 || t >= 1.0) throw ValidationError("thresholds must lie in [0.5, 1)");
    }
    if (noise == NoiseMode::kSigma && !(sigma > 0.0)) throw ValidationError("sigma must be positive");
  }
};

// num_vectors perturbed copies x - delta_k with seeded zero-mean Gaussian delta_k.
inline std::vector<EmbeddingVector> random_perturb(const EmbeddingVector& x, const RobustnessConfig& config) {
  config.validate();
  Rng rng(config.seed);
  std::vector<EmbeddingVector> out;
  out.reserve(config.num_vectors);
  for (std::size_t k = 0; k < config.num_vectors; ++k) {
    EmbeddingVector delta = config.noise == NoiseMode::kUnitNorm
                                ? EmbeddingVector(unit_gaussian(rng, x.size()))
                                : EmbeddingVector(rng.gaussian_vector(x.size())) * config.sigma;
    out.push_back(x - delta);
  }
  return out;
}

// Whether an image has at least one prediction flip, and the highest
// confidence among its flips.
struct FlipSummary {
  bool flipped = false;
  double confidence = 0.0;
};

struct RandomFlipResult {
  FlipSummary summary;
  std::vector<double> flip_confidences;
};

inline RandomFlipResult random_flips(const EmbeddingVector& x, const ClassifierWeights& weights,
                                     const RobustnessConfig& config) {
  const Prediction original = predict(weights, x);
  RandomFlipResult r;
  for (const auto& xp : random_perturb(x, config)) {
    const Prediction p = predict(weights, xp);
    if (p.label == original.label) continue;
    r.flip_confidences.push_back(p.confidence);
    r.summary.flipped = true;
    r.summary.confidence = std::max(r.summary.confidence, p.confidence);
  }
  return r;
}

struct CurvePoint {
  double threshold = 0.0;
  double validity = 0.0;
};

// Fraction of images with a flip at confidence >= threshold. Non-increasing
// in the threshold. Undefined (nullopt) for an empty cohort.
inline std::optional<std::vector<CurvePoint>> validity_at_thresholds(const std::vector<FlipSummary>& cohort,
                                                                     const std::vector<double>& thresholds) {
  if (cohort.empty()) return std::nullopt;
  std::vector<CurvePoint> curve;
  for (double t : thresholds) {
    const auto hits = std::count_if(cohort.begin(), cohort.end(),
                                    [&](const FlipSummary& f) { return f.flipped && f.confidence >= t; });
    curve.push_back({t, static_cast<double>(hits) / static_cast<double>(cohort.size())});
  }
  return curve;
}

inline void write_curve_csv(const std::string& method, const std::vector<CurvePoint>& curve, std::ostream& out) {
  for (const auto& p : curve) {
    out << format_double(p.threshold) << ',' << method << ',' << format_double(p.validity) << '\n';
  }
}

}  // namespace dex

#endif  // DEX_ROBUSTNESS_HPP
