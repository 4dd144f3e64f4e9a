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

// Dataset-level scores over a cohort of explanation sets.
//
// D_pr is the set of correctly classified private images (every explanation
// set that was not skipped) and D_b the subset with a non-empty best set. All
// per-explanation averages run over the best sets of D_b.
//
//   V  validity      |D_b| / |D_pr|
//   F  feasibility   mean |detected(I) ∩ tags(c)| / |tags(c)|
//   S  sparsity      mean number of concepts per explanation
//   P  proximity     mean cos(x, x_hat)
//   C  confidence    mean probability of the flipped class
//   D  diversity     mean over images of sum_{i<j}(1 - cos(t_i, t_j)) / (N(N-1))
//   R  collapse      mean over ordered image pairs of 1 - cos(centroid_I, centroid_J)
//
// D divides an i<j sum by N(N-1), which is half the
// mean over unordered pairs; DiversityVariant::kUnorderedMean gives the latter.

#ifndef DEX_METRICS_HPP
#define DEX_METRICS_HPP

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dex/core.hpp"
#include "dex/providers.hpp"

namespace dex {

struct MetricValue {
  std::optional<double> value;
  std::string status = "ok";
  std::size_t terms = 0;     // number of averaged terms
  std::size_t excluded = 0;  // items dropped (N < 2, zero-norm vectors)

  bool defined() const { return value.has_value(); }

  static MetricValue undefined(std::string why) {
    MetricValue m;
    m.status = "undefined: " + std::move(why);
    return m;
  }

  bool operator==(const MetricValue&) const = default;
};

enum class DiversityVariant { kLiteral, kUnorderedMean };

struct MetricOptions {
  DiversityVariant diversity = DiversityVariant::kLiteral;
};

struct CohortEntry {
  std::string image_id;
  ExplanationSet explanations;
};

class EvaluationCohort {
 public:
  EvaluationCohort() = default;
  explicit EvaluationCohort(std::vector<CohortEntry> entries) : entries_(std::move(entries)) {}

  // Pairs every explanation set with its manifest record; unknown ids are an
  // error.
  static EvaluationCohort from_sets(const DatasetManifest& manifest, const std::vector<ExplanationSet>& sets) {
    std::vector<CohortEntry> entries;
    for (const auto& s : sets) {
      if (manifest.find(s.image_id) == nullptr) throw MissingRecordError(s.image_id);
      entries.push_back({s.image_id, s});
    }
    return EvaluationCohort(std::move(entries));
  }

  const std::vector<CohortEntry>& entries() const { return entries_; }

  std::size_t private_count() const {
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [](const CohortEntry& e) {
      return e.explanations.in_private_cohort();
    }));
  }

  std::size_t explained_count() const { return explained().size(); }

  // Entries of D_b.
  std::vector<const CohortEntry*> explained() const {
    std::vector<const CohortEntry*> out;
    for (const auto& e : entries_) {
      if (e.explanations.in_private_cohort() && !e.explanations.best.empty()) out.push_back(&e);
    }
    return out;
  }

 private:
  std::vector<CohortEntry> entries_;
};

namespace detail {

template <typename TermFn>
MetricValue mean_over_best(const EvaluationCohort& cohort, TermFn term) {
  MetricValue m;
  double sum = 0.0;
  for (const CohortEntry* e : cohort.explained()) {
    for (const auto& c : e->explanations.best) {
      const std::optional<double> t = term(*e, c);
      if (!t) {
        ++m.excluded;
        continue;
      }
      sum += *t;
      ++m.terms;
    }
  }
  if (m.terms == 0) {
    MetricValue u = MetricValue::undefined(cohort.explained_count() == 0 ? "no explained images" : "no usable terms");
    u.excluded = m.excluded;
    return u;
  }
  m.value = sum / static_cast<double>(m.terms);
  if (m.excluded > 0) m.status = "ok (" + std::to_string(m.excluded) + " excluded)";
  return m;
}

}  // namespace detail

inline MetricValue validity(const EvaluationCohort& cohort) {
  const std::size_t d_pr = cohort.private_count();
  if (d_pr == 0) return MetricValue::undefined("no correctly classified private images");
  MetricValue m;
  m.value = static_cast<double>(cohort.explained_count()) / static_cast<double>(d_pr);
  m.terms = d_pr;
  return m;
}

// Tags are compared by exact equality of their canonical forms.
inline MetricValue feasibility(const EvaluationCohort& cohort, const Provider& provider) {
  return detail::mean_over_best(cohort, [&](const CohortEntry& e, const Candidate& c) -> std::optional<double> {
    const auto detected = provider.detect_tags(e.image_id);
    const auto& tags = c.scenario.tags();
    if (tags.empty()) return std::nullopt;
    const auto hits = std::count_if(tags.begin(), tags.end(), [&](const std::string& t) {
      return std::find(detected.begin(), detected.end(), t) != detected.end();
    });
    return static_cast<double>(hits) / static_cast<double>(tags.size());
  });
}

inline MetricValue sparsity(const EvaluationCohort& cohort) {
  return detail::mean_over_best(cohort, [](const CohortEntry&, const Candidate& c) -> std::optional<double> {
    return static_cast<double>(c.concept_count);
  });
}

// cos(E_I(I), x_hat); zero-norm pairs are excluded.
inline MetricValue proximity(const EvaluationCohort& cohort, const Provider& provider) {
  return detail::mean_over_best(cohort, [&](const CohortEntry& e, const Candidate& c) -> std::optional<double> {
    return try_cosine_similarity(provider.embed_image(e.image_id), c.counterfactual_embedding);
  });
}

inline MetricValue confidence_metric(const EvaluationCohort& cohort) {
  return detail::mean_over_best(cohort, [](const CohortEntry&, const Candidate& c) -> std::optional<double> {
    return c.confidence;
  });
}

// Per-image diversity term; nullopt when the image has fewer than two best
// explanations.
inline std::optional<double> diversity_term(const std::vector<Candidate>& best, const Provider& text_provider,
                                            DiversityVariant variant) {
  const std::size_t n = best.size();
  if (n < 2) return std::nullopt;
  std::vector<std::string> prompts;
  for (const auto& c : best) prompts.push_back(c.scenario.prompt());
  const auto vectors = text_provider.embed_texts(prompts);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto cs = try_cosine_similarity(vectors[i], vectors[j]);
      if (!cs) return std::nullopt;
      sum += 1.0 - *cs;
    }
  }
  const double pairs = static_cast<double>(n * (n - 1));
  return variant == DiversityVariant::kLiteral ? sum / pairs : sum / (pairs / 2.0);
}

inline MetricValue diversity(const EvaluationCohort& cohort, const Provider& text_provider,
                             DiversityVariant variant = DiversityVariant::kLiteral) {
  MetricValue m;
  double sum = 0.0;
  for (const CohortEntry* e : cohort.explained()) {
    const auto t = diversity_term(e->explanations.best, text_provider, variant);
    if (!t) {
      ++m.excluded;
      continue;
    }
    sum += *t;
    ++m.terms;
  }
  if (m.terms == 0) {
    MetricValue u = MetricValue::undefined("no image with at least two explanations");
    u.excluded = m.excluded;
    return u;
  }
  m.value = sum / static_cast<double>(m.terms);
  if (m.excluded > 0) m.status = "ok (" + std::to_string(m.excluded) + " images with N < 2 excluded)";
  return m;
}

// Mean of the text embeddings of an image's best explanations.
inline EmbeddingVector explanation_centroid(const std::vector<Candidate>& best, const Provider& text_provider) {
  std::vector<std::string> prompts;
  for (const auto& c : best) prompts.push_back(c.scenario.prompt());
  const auto vectors = text_provider.embed_texts(prompts);
  EmbeddingVector sum = EmbeddingVector::zeros(vectors.front().size());
  for (const auto& v : vectors) sum += v;
  return sum * (1.0 / static_cast<double>(vectors.size()));
}

inline MetricValue collapse(const EvaluationCohort& cohort, const Provider& text_provider) {
  const auto explained = cohort.explained();
  std::vector<EmbeddingVector> centroids;
  MetricValue m;
  for (const CohortEntry* e : explained) {
    EmbeddingVector c = explanation_centroid(e->explanations.best, text_provider);
    if (l2_norm(c) == 0.0) {
      ++m.excluded;
      continue;
    }
    centroids.push_back(std::move(c));
  }
  const std::size_t n = centroids.size();
  if (n < 2) {
    MetricValue u = MetricValue::undefined("fewer than two explained images");
    u.excluded = m.excluded;
    return u;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) sum += 1.0 - cosine_similarity(centroids[i], centroids[j]);
    }
  }
  m.terms = n * (n - 1);
  m.value = sum / static_cast<double>(m.terms);
  return m;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct PerImageRow {
  std::string image_id;
  std::string status;
  std::size_t n_best = 0;
  std::optional<double> feasibility;
  std::optional<double> sparsity;
  std::optional<double> proximity;
  std::optional<double> confidence;
  std::optional<double> diversity;

  bool operator==(const PerImageRow&) const = default;
};

// Sparsity is drawn on a [0, 1] "higher is better" axis as 1 - S / 100.
inline constexpr double kSparsityDisplayMax = 100.0;

struct MetricReport {
  std::string method = "dex";
  MetricValue validity, feasibility, sparsity, proximity, confidence, diversity, collapse;
  std::size_t private_count = 0;
  std::size_t explained_count = 0;
  DiversityVariant diversity_variant = DiversityVariant::kLiteral;
  std::vector<PerImageRow> per_image;

  std::optional<double> sparsity_display() const {
    if (!sparsity.value) return std::nullopt;
    return 1.0 - std::clamp(*sparsity.value, 0.0, kSparsityDisplayMax) / kSparsityDisplayMax;
  }

  bool operator==(const MetricReport&) const = default;
};

inline MetricReport compute_report(const EvaluationCohort& cohort, const Provider& provider,
                                   const Provider& text_provider, const MetricOptions& options = {},
                                   std::string method = "dex") {
  MetricReport r;
  r.method = std::move(method);
  r.diversity_variant = options.diversity;
  r.private_count = cohort.private_count();
  r.explained_count = cohort.explained_count();
  r.validity = validity(cohort);
  r.feasibility = feasibility(cohort, provider);
  r.sparsity = sparsity(cohort);
  r.proximity = proximity(cohort, provider);
  r.confidence = confidence_metric(cohort);
  r.diversity = diversity(cohort, text_provider, options.diversity);
  r.collapse = collapse(cohort, text_provider);

  for (const auto& e : cohort.entries()) {
    PerImageRow row;
    row.image_id = e.image_id;
    row.status = std::string(to_string(e.explanations.status));
    row.n_best = e.explanations.best.size();
    if (!e.explanations.best.empty() && e.explanations.in_private_cohort()) {
      const EvaluationCohort single({e});
      row.feasibility = dex::feasibility(single, provider).value;
      row.sparsity = dex::sparsity(single).value;
      row.proximity = dex::proximity(single, provider).value;
      row.confidence = confidence_metric(single).value;
      row.diversity = diversity_term(e.explanations.best, text_provider, options.diversity);
    }
    r.per_image.push_back(std::move(row));
  }
  return r;
}

inline MetricReport compute_report(const EvaluationCohort& cohort, const Provider& provider,
                                   const MetricOptions& options = {}, std::string method = "dex") {
  return compute_report(cohort, provider, provider, options, std::move(method));
}

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::optional<double> json_opt(const nlohmann::json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

inline nlohmann::json to_json(const MetricValue& m) {
  return {{"value", opt_json(m.value)}, {"status", m.status}, {"terms", m.terms}, {"excluded", m.excluded}};
}

inline MetricValue metric_from_json(const nlohmann::json& j) {
  MetricValue m;
  m.value = json_opt(j.at("value"));
  m.status = j.at("status").get<std::string>();
  m.terms = j.at("terms").get<std::size_t>();
  m.excluded = j.at("excluded").get<std::size_t>();
  return m;
}

}  // namespace detail

inline nlohmann::json to_json(const MetricReport& r) {
  using detail::opt_json;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.per_image) {
    rows.push_back({{"image_id", row.image_id},
                    {"status", row.status},
                    {"n_best", row.n_best},
                    {"feasibility", opt_json(row.feasibility)},
                    {"sparsity", opt_json(row.sparsity)},
                    {"proximity", opt_json(row.proximity)},
                    {"confidence", opt_json(row.confidence)},
                    {"diversity", opt_json(row.diversity)}});
  }
  return {{"method", r.method},
          {"cohort", {{"private_count", r.private_count}, {"explained_count", r.explained_count}}},
          {"metrics",
           {{"V", detail::to_json(r.validity)},
            {"F", detail::to_json(r.feasibility)},
            {"S", detail::to_json(r.sparsity)},
            {"P", detail::to_json(r.proximity)},
            {"C", detail::to_json(r.confidence)},
            {"D", detail::to_json(r.diversity)},
            {"R", detail::to_json(r.collapse)}}},
          {"diversity_variant", r.diversity_variant == DiversityVariant::kLiteral ? "literal" : "unordered-mean"},
          {"display", {{"S_scaled_inverted", opt_json(r.sparsity_display())}, {"S_max", kSparsityDisplayMax}}},
          {"per_image", rows}};
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  using detail::json_opt;
  MetricReport r;
  try {
    r.method = j.at("method").get<std::string>();
    r.private_count = j.at("cohort").at("private_count").get<std::size_t>();
    r.explained_count = j.at("cohort").at("explained_count").get<std::size_t>();
    const auto& m = j.at("metrics");
    r.validity = detail::metric_from_json(m.at("V"));
    r.feasibility = detail::metric_from_json(m.at("F"));
    r.sparsity = detail::metric_from_json(m.at("S"));
    r.proximity = detail::metric_from_json(m.at("P"));
    r.confidence = detail::metric_from_json(m.at("C"));
    r.diversity = detail::metric_from_json(m.at("D"));
    r.collapse = detail::metric_from_json(m.at("R"));
    r.diversity_variant = j.at("diversity_variant").get<std::string>() == "literal" ? DiversityVariant::kLiteral
                                                                                     : DiversityVariant::kUnorderedMean;
    for (const auto& row : j.at("per_image")) {
      PerImageRow p;
      p.image_id = row.at("image_id").get<std::string>();
      p.status = row.at("status").get<std::string>();
      p.n_best = row.at("n_best").get<std::size_t>();
      p.feasibility = json_opt(row.at("feasibility"));
      p.sparsity = json_opt(row.at("sparsity"));
      p.proximity = json_opt(row.at("proximity"));
      p.confidence = json_opt(row.at("confidence"));
      p.diversity = json_opt(row.at("diversity"));
      r.per_image.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed metric report: ") + e.what());
  }
  return r;
}

namespace detail {

inline std::string csv_number(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace detail

inline void write_per_image_csv(const MetricReport& r, std::ostream& out) {
  using detail::csv_number;
  out << "image_id,status,n_best,feasibility,sparsity,proximity,confidence,diversity\n";
  for (const auto& row : r.per_image) {
    out << row.image_id << ',' << row.status << ',' << row.n_best << ',' << csv_number(row.feasibility) << ','
        << csv_number(row.sparsity) << ',' << csv_number(row.proximity) << ',' << csv_number(row.confidence) << ','
        << csv_number(row.diversity) << '\n';
  }
}

// Radar-chart data. "value" is what gets drawn (S scaled and inverted),
// "raw_value" the metric itself.
inline void write_figure_csv(const std::vector<MetricReport>& reports, std::ostream& out, bool header = true) {
  using detail::csv_number;
  if (header) out << "metric,method,value,raw_value\n";
  for (const auto& r : reports) {
    auto row = [&](const char* name, const std::optional<double>& shown, const std::optional<double>& raw) {
      out << name << ',' << r.method << ',' << csv_number(shown) << ',' << csv_number(raw) << '\n';
    };
    row("V", r.validity.value, r.validity.value);
    row("F", r.feasibility.value, r.feasibility.value);
    row("S", r.sparsity_display(), r.sparsity.value);
    row("R", r.collapse.value, r.collapse.value);
    row("P", r.proximity.value, r.proximity.value);
    row("C", r.confidence.value, r.confidence.value);
    row("D", r.diversity.value, r.diversity.value);
  }
}

}  // namespace dex

#endif  // DEX_METRICS_HPP
