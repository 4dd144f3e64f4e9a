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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dex/explanation_io.hpp"
#include "dex/metrics.hpp"
#include "test_support.hpp"

namespace dex {
namespace {

using testing::make_candidate;
using testing::make_manifest;
using testing::make_record;

ExplanationSet set_with(std::string id, ExplanationStatus status, std::vector<Candidate> best) {
  ExplanationSet s;
  s.image_id = std::move(id);
  s.status = status;
  s.best = std::move(best);
  s.pareto = s.candidates_valid = s.candidates_all = s.best;
  return s;
}

EvaluationCohort cohort_of(std::vector<ExplanationSet> sets) {
  std::vector<CohortEntry> entries;
  for (auto& s : sets) entries.push_back({s.image_id, std::move(s)});
  return EvaluationCohort(std::move(entries));
}

struct Fixture {
  std::shared_ptr<DatasetManifest> manifest;
  std::unique_ptr<ManifestProvider> provider;
  std::vector<ExplanationSet> sets;
  nlohmann::json expected;
};

Fixture load_fixture() {
  const auto dir = testing::data_dir() / "metric_fixture";
  Fixture f;
  f.manifest = std::make_shared<DatasetManifest>(load_manifest(dir / "manifest.jsonl"));
  ProviderConfig config;
  config.kind = ProviderKind::kManifest;
  f.provider = std::make_unique<ManifestProvider>(config, f.manifest, load_text_table(dir / "text_embeddings.jsonl"));
  f.sets = load_explanations(dir / "explanations.jsonl");
  f.expected = nlohmann::json::parse(testing::read_text(dir / "expected.json"));
  return f;
}

TEST(Validity, ExplainedOverPrivateCohort) {
  const auto c = cohort_of({set_with("a", ExplanationStatus::kExplained, {make_candidate({"x"}, 0.9, 0.5)}),
                            set_with("b", ExplanationStatus::kNoValid, {}),
                            set_with("c", ExplanationStatus::kExplained, {make_candidate({"y"}, 0.9, 0.5)}),
                            set_with("d", ExplanationStatus::kSkipped, {})});
  ASSERT_TRUE(validity(c).defined());
  EXPECT_DOUBLE_EQ(*validity(c).value, 2.0 / 3.0);
  EXPECT_EQ(c.private_count(), 3u);
}

TEST(Validity, EmptyCohortIsUndefinedNotZero) {
  const auto none = cohort_of({});
  EXPECT_FALSE(validity(none).defined());
  const auto skipped = cohort_of({set_with("d", ExplanationStatus::kSkipped, {})});
  EXPECT_FALSE(validity(skipped).defined());
  EXPECT_NE(validity(skipped).status.find("undefined"), std::string::npos);
}

TEST(Sparsity, MeanConceptCount) {
  const auto c = cohort_of({set_with("a", ExplanationStatus::kExplained,
                                     {make_candidate({"x"}, 0.9, 0.5), make_candidate({"x", "y", "z"}, 0.8, 0.6)})});
  EXPECT_DOUBLE_EQ(*sparsity(c).value, 2.0);
}

TEST(Confidence, MeanOfFlippedClassProbability) {
  const auto c = cohort_of({set_with("a", ExplanationStatus::kExplained,
                                     {make_candidate({"x"}, 0.9, 0.5), make_candidate({"y"}, 0.6, 0.6)})});
  EXPECT_DOUBLE_EQ(*confidence_metric(c).value, 0.75);
}

TEST(Feasibility, FractionOfDetectedTags) {
  auto m = make_manifest(2, {make_record("a", PrivacyLabel::kPrivate, {1.0, 0.0}, {"x", "y", "z"}, {"x", "z"})});
  const auto p = testing::table_provider(m, {});
  const auto c = cohort_of({set_with("a", ExplanationStatus::kExplained,
                                     {make_candidate({"x", "y"}, 0.9, 0.5), make_candidate({"z"}, 0.6, 0.6)})});
  EXPECT_DOUBLE_EQ(*feasibility(c, *p).value, 0.75);
}

TEST(Proximity, UsesImageEmbeddingAndCounterfactual) {
  auto m = make_manifest(2, {make_record("a", PrivacyLabel::kPrivate, {1.0, 0.0}, {"x"})});
  const auto p = testing::table_provider(m, {});
  Candidate c1 = make_candidate({"x"}, 0.9, 0.0);
  c1.counterfactual_embedding = EmbeddingVector{3.0, 4.0};
  Candidate c2 = make_candidate({"y"}, 0.9, 0.0);
  c2.counterfactual_embedding = EmbeddingVector{0.0, 0.0};
  const auto c = cohort_of({set_with("a", ExplanationStatus::kExplained, {c1, c2})});
  const MetricValue v = proximity(c, *p);
  EXPECT_DOUBLE_EQ(*v.value, 0.6);
  EXPECT_EQ(v.excluded, 1u);
}

TEST(Diversity, LiteralAndUnorderedMeanDifferByTwo) {
  auto m = make_manifest(2, {make_record("a", PrivacyLabel::kPrivate, {1.0, 0.0}, {"x"})});
  const auto p = testing::table_provider(m, {{"x", {1.0, 0.0}}, {"y", {0.0, 1.0}}, {"z", {-1.0, 0.0}}});
  const std::vector<Candidate> best{make_candidate({"x"}, 0.9, 0.5), make_candidate({"y"}, 0.9, 0.5),
                                    make_candidate({"z"}, 0.9, 0.5)};
  // Pair terms 1, 2, 1 over N(N-1) = 6.
  EXPECT_DOUBLE_EQ(*diversity_term(best, *p, DiversityVariant::kLiteral), 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(*diversity_term(best, *p, DiversityVariant::kUnorderedMean), 4.0 / 3.0);
  EXPECT_FALSE(diversity_term({best[0]}, *p, DiversityVariant::kLiteral).has_value());
}

TEST(Diversity, UnorderedMeanIsTwiceLiteralOnRandomSets) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 3 + rng.below(5);
    auto m = make_manifest(d, {make_record("a", PrivacyLabel::kPrivate, std::vector<double>(d, 1.0), {"x"})});
    std::map<std::string, std::vector<double>> table;
    std::vector<Candidate> best;
    const std::size_t n = 2 + rng.below(4);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string t = "t" + std::to_string(i);
      table[t] = unit_gaussian(rng, d);
      best.push_back(make_candidate({t}, 0.9, 0.5));
    }
    const auto p = testing::table_provider(m, table);
    const double lit = *diversity_term(best, *p, DiversityVariant::kLiteral);
    EXPECT_NEAR(*diversity_term(best, *p, DiversityVariant::kUnorderedMean), 2.0 * lit, 1e-12);
    EXPECT_GE(lit, 0.0);
    EXPECT_LE(lit, 1.0);
  }
}

TEST(Collapse, OrthogonalCentroidsScoreOne) {
  auto m = make_manifest(2, {make_record("a", PrivacyLabel::kPrivate, {1.0, 0.0}, {"x"}),
                             make_record("b", PrivacyLabel::kPrivate, {0.0, 1.0}, {"y"})});
  const auto p = testing::table_provider(m, {{"x", {1.0, 0.0}}, {"y", {0.0, 1.0}}});
  const auto c = cohort_of({set_with("a", ExplanationStatus::kExplained, {make_candidate({"x"}, 0.9, 0.5)}),
                            set_with("b", ExplanationStatus::kExplained, {make_candidate({"y"}, 0.9, 0.5)})});
  EXPECT_DOUBLE_EQ(*collapse(c, *p).value, 1.0);
  EXPECT_FALSE(collapse(cohort_of({c.entries()[0].explanations}), *p).defined());
}

TEST(Collapse, IdenticalExplanationsScoreZero) {
  auto m = make_manifest(2, {make_record("a", PrivacyLabel::kPrivate, {1.0, 0.0}, {"x"}),
                             make_record("b", PrivacyLabel::kPrivate, {0.0, 1.0}, {"x"})});
  const auto p = testing::table_provider(m, {{"x", {0.3, 0.4}}});
  const auto c = cohort_of({set_with("a", ExplanationStatus::kExplained, {make_candidate({"x"}, 0.9, 0.5)}),
                            set_with("b", ExplanationStatus::kExplained, {make_candidate({"x"}, 0.9, 0.5)})});
  EXPECT_NEAR(*collapse(c, *p).value, 0.0, 1e-15);
}

TEST(Fixture, FullReportMatchesHandComputedValues) {
  const Fixture f = load_fixture();
  const auto cohort = EvaluationCohort::from_sets(*f.manifest, f.sets);
  const MetricReport r = compute_report(cohort, *f.provider);
  const auto& e = f.expected;
  EXPECT_NEAR(*r.validity.value, e["V"]["value"].get<double>(), 1e-9);
  EXPECT_NEAR(*r.feasibility.value, 29.0 / 36.0, 1e-9);
  EXPECT_NEAR(*r.sparsity.value, 5.0 / 3.0, 1e-9);
  EXPECT_NEAR(*r.proximity.value, 4.0 / 15.0, 1e-9);
  EXPECT_NEAR(*r.confidence.value, 23.0 / 30.0, 1e-9);
  EXPECT_NEAR(*r.diversity.value, (0.5 + 3.44 / 6.0) / 2.0, 1e-9);
  EXPECT_NEAR(*r.collapse.value, (3.0 - 14.0 / std::sqrt(170.0)) / 3.0, 1e-9);
  EXPECT_NEAR(*r.sparsity_display(), 1.0 - (5.0 / 3.0) / 100.0, 1e-9);
  for (const char* key : {"F", "S", "P", "C", "D", "R", "S_display"}) {
    SCOPED_TRACE(key);
    EXPECT_TRUE(e.contains(key));
  }
  EXPECT_NEAR(*r.feasibility.value, e["F"]["value"].get<double>(), 1e-9);
  EXPECT_NEAR(*r.collapse.value, e["R"]["value"].get<double>(), 1e-9);
  EXPECT_EQ(r.diversity.excluded, 1u);
}

TEST(Fixture, UnorderedMeanDiversityDoubles) {
  const Fixture f = load_fixture();
  const auto cohort = EvaluationCohort::from_sets(*f.manifest, f.sets);
  const MetricReport lit = compute_report(cohort, *f.provider);
  const MetricReport un = compute_report(cohort, *f.provider, MetricOptions{DiversityVariant::kUnorderedMean});
  EXPECT_NEAR(*un.diversity.value, f.expected["D_unordered_mean"]["value"].get<double>(), 1e-9);
  EXPECT_NEAR(*un.diversity.value, 2.0 * *lit.diversity.value, 1e-12);
  EXPECT_EQ(*un.validity.value, *lit.validity.value);
  EXPECT_EQ(*un.collapse.value, *lit.collapse.value);
}

TEST(Fixture, UnknownImageIdIsAnError) {
  const Fixture f = load_fixture();
  auto sets = f.sets;
  sets[0].image_id = "nope";
  EXPECT_THROW(EvaluationCohort::from_sets(*f.manifest, sets), MissingRecordError);
}

TEST(Report, JsonRoundTrip) {
  const Fixture f = load_fixture();
  const MetricReport r = compute_report(EvaluationCohort::from_sets(*f.manifest, f.sets), *f.provider);
  const MetricReport back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back, r);
  EXPECT_THROW(report_from_json(nlohmann::json{{"method", "x"}}), ValidationError);
}

TEST(Report, UndefinedMetricsSerializeAsNull) {
  auto m = make_manifest(2, {make_record("a", PrivacyLabel::kPublic, {1.0, 0.0}, {"x"})});
  const auto p = testing::table_provider(m, {});
  const MetricReport r = compute_report(cohort_of({set_with("a", ExplanationStatus::kSkipped, {})}), *p);
  const auto j = to_json(r);
  EXPECT_TRUE(j["metrics"]["V"]["value"].is_null());
  EXPECT_TRUE(j["metrics"]["R"]["value"].is_null());
  EXPECT_TRUE(j["display"]["S_scaled_inverted"].is_null());
}

TEST(Report, FigureCsvShowsScaledSparsity) {
  const Fixture f = load_fixture();
  const MetricReport r = compute_report(EvaluationCohort::from_sets(*f.manifest, f.sets), *f.provider);
  std::ostringstream out;
  write_figure_csv({r}, out);
  const std::string csv = out.str();
  EXPECT_EQ(csv.rfind("metric,method,value,raw_value\n", 0), 0u);
  EXPECT_NE(csv.find("S,dex," + format_double(*r.sparsity_display()) + "," + format_double(*r.sparsity.value)),
            std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
}

TEST(Report, PerImageCsvHasOneRowPerImage) {
  const Fixture f = load_fixture();
  const MetricReport r = compute_report(EvaluationCohort::from_sets(*f.manifest, f.sets), *f.provider);
  std::ostringstream out;
  write_per_image_csv(r, out);
  const std::string csv = out.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("img2,explained,1,"), std::string::npos);
}

}  // namespace
}  // namespace dex
