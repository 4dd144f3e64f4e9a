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

// Command implementations behind the dex executable. Each command takes one
// option bundle, writes its artifacts into out_dir and echoes the effective
// options to out_dir/config.json. `run_from_config` replays such an echo.

#ifndef DEX_COMMANDS_HPP
#define DEX_COMMANDS_HPP

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dex/arithmetic.hpp"
#include "dex/classifier.hpp"
#include "dex/core.hpp"
#include "dex/countex.hpp"
#include "dex/explanation_io.hpp"
#include "dex/manifest.hpp"
#include "dex/metrics.hpp"
#include "dex/parallel.hpp"
#include "dex/providers.hpp"
#include "dex/remote_provider.hpp"
#include "dex/robustness.hpp"
#include "dex/selection.hpp"
#include "dex/world.hpp"

namespace dex {

inline constexpr const char* kEndpointEnvVar = "DEX_BRIDGE_ENDPOINT";

// ---------------------------------------------------------------------------
// Option bundles
// ---------------------------------------------------------------------------

struct ProviderOptions {
  std::string provider = "manifest";
  std::string endpoint;
  std::string text_table;
  std::string image_dir;
  std::string anchor{kDefaultAnchorPrompt};
  double residual = 0.0;
  int timeout_ms = 30000;
  int max_retries = 2;
  int max_in_flight = 4;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ProviderOptions, provider, endpoint, text_table, image_dir, anchor,
                                                residual, timeout_ms, max_retries, max_in_flight)

struct GenerateWorldCommand {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t dimension = 32;
  std::size_t images = 200;
  std::size_t vocabulary = 20;
  std::size_t min_tags = 2;
  std::size_t max_tags = 4;
  double private_fraction = 0.5;
  std::string marker = "secret";
  double residual = 0.0;
  bool sidecar = false;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenerateWorldCommand, out_dir, seed, dimension, images, vocabulary,
                                                min_tags, max_tags, private_fraction, marker, residual, sidecar)

struct TrainCommand {
  std::string manifest;
  std::string out_dir;
  std::uint64_t seed = 0;
  int epochs = 100;
  double learning_rate = 1e-3;
  int batch_size = 64;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainCommand, manifest, out_dir, seed, epochs, learning_rate,
                                                batch_size)

struct ExplainCommand {
  std::string manifest;
  std::string weights;
  std::string out_dir;
  std::uint64_t seed = 0;
  ProviderOptions provider;
  std::size_t s = 3;
  std::size_t max_scenarios = 10000;
  std::size_t q = 3;
  std::vector<std::string> objectives{"confidence", "proximity"};
  std::size_t subset_exact_limit = 15;
  std::string direction = "joined";
  bool include_all = false;
  std::size_t workers = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExplainCommand, manifest, weights, out_dir, seed, provider, s,
                                                max_scenarios, q, objectives, subset_exact_limit, direction,
                                                include_all, workers)

struct EvaluateCommand {
  std::string manifest;
  std::vector<std::string> explanations;
  std::vector<std::string> methods;
  std::string out_dir;
  std::uint64_t seed = 0;
  ProviderOptions provider;
  std::string variant = "literal";
  std::vector<double> thresholds{0.5, 0.6, 0.7, 0.8, 0.9};
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvaluateCommand, manifest, explanations, methods, out_dir, seed,
                                                provider, variant, thresholds)

struct ProbeCommand {
  std::string spec;
  std::string manifest;
  std::size_t dimension = 0;
  std::string out_dir;
  std::uint64_t seed = 0;
  ProviderOptions provider;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ProbeCommand, spec, manifest, dimension, out_dir, seed, provider)

struct BaselineCommand {
  std::string manifest;
  std::string weights;
  std::string library;
  std::string out_dir;
  std::uint64_t seed = 0;
  ProviderOptions provider;
  double learning_rate = 1e-2;
  int max_iterations = 100;
  double lambda_identity = 0.1;
  double lambda_l1 = 0.1;
  double lambda_l2 = 0.1;
  double threshold = 0.1;
  std::size_t top_k = 3;
  std::string sparsity = "signed";
  std::string ranking = "most-negative";
  std::string variant = "literal";
  std::size_t workers = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BaselineCommand, manifest, weights, library, out_dir, seed, provider,
                                                learning_rate, max_iterations, lambda_identity, lambda_l1, lambda_l2,
                                                threshold, top_k, sparsity, ranking, variant, workers)

struct RobustnessCommand {
  std::string manifest;
  std::string weights;
  std::string explanations;
  std::string out_dir;
  std::uint64_t seed = 0;
  ProviderOptions provider;
  std::vector<std::size_t> num_vectors{10, 200};
  std::string noise = "unit-norm";
  double sigma = 1.0;
  std::vector<double> thresholds{0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t workers = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RobustnessCommand, manifest, weights, explanations, out_dir, seed,
                                                provider, num_vectors, noise, sigma, thresholds, workers)

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

namespace detail {

inline std::filesystem::path prepare_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) throw ValidationError("--out-dir is required");
  std::filesystem::path p(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw RuntimeError("cannot create output directory '" + out_dir + "': " + ec.message());
  return p;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw RuntimeError("failed writing '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

template <typename Options>
void echo_config(const std::filesystem::path& out_dir, const std::string& command, const Options& options) {
  write_json(out_dir / "config.json", {{"command", command}, {"options", options}});
}

inline std::shared_ptr<DatasetManifest> require_manifest(const std::string& path) {
  if (path.empty()) throw ValidationError("--manifest is required");
  return std::make_shared<DatasetManifest>(load_manifest(path));
}

inline ClassifierWeights require_weights(const std::string& path) {
  if (path.empty()) throw ValidationError("--weights is required");
  return load_weights(path);
}

inline DirectionMode parse_direction(const std::string& s) {
  if (s == "joined") return DirectionMode::kJoinedPrompt;
  if (s == "per-tag") return DirectionMode::kPerTagSum;
  throw ValidationError("unknown direction mode '" + s + "' (expected joined or per-tag)");
}

inline DiversityVariant parse_variant(const std::string& s) {
  if (s == "literal") return DiversityVariant::kLiteral;
  if (s == "unordered-mean") return DiversityVariant::kUnorderedMean;
  throw ValidationError("unknown diversity variant '" + s + "' (expected literal or unordered-mean)");
}

inline void check_dimensions(const ClassifierWeights& w, const Provider& provider) {
  if (w.dimension() != provider.dimension()) {
    throw DimensionError(provider.dimension(), w.dimension(), "classifier weights vs embedding space");
  }
}

// Correctly classified private images, in manifest order.
inline std::vector<const ImageRecord*> private_cohort(const DatasetManifest& m, const ClassifierWeights& w,
                                                      const Provider& provider) {
  std::vector<const ImageRecord*> out;
  for (const auto& r : m.records) {
    if (r.label == PrivacyLabel::kPrivate && predict(w, provider.embed_image(r.id)).label == PrivacyLabel::kPrivate) {
      out.push_back(&r);
    }
  }
  return out;
}

inline std::string curve_csv(const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves) {
  std::ostringstream out;
  out << "threshold,method,validity\n";
  for (const auto& [method, curve] : curves) write_curve_csv(method, curve, out);
  return out.str();
}

// Per-image flip summary of an explanation cohort: flipped when the best set is
// non-empty, with the highest confidence among its members.
inline std::vector<FlipSummary> flip_summaries(const std::vector<ExplanationSet>& sets) {
  std::vector<FlipSummary> out;
  for (const auto& s : sets) {
    if (!s.in_private_cohort()) continue;
    FlipSummary f;
    for (const auto& c : s.best) {
      f.flipped = true;
      f.confidence = std::max(f.confidence, c.confidence);
    }
    out.push_back(f);
  }
  return out;
}

}  // namespace detail

inline std::string resolve_endpoint(const std::string& flag) {
  if (!flag.empty()) return flag;
  const char* env = std::getenv(kEndpointEnvVar);
  return env ? std::string(env) : std::string();
}

// Synthetic providers live in the manifest's space unless `dimension` is set.
inline std::unique_ptr<Provider> make_provider(const ProviderOptions& options, std::uint64_t seed,
                                               std::shared_ptr<const DatasetManifest> manifest,
                                               std::size_t dimension = 0) {
  ProviderConfig config;
  config.kind = parse_provider_kind(options.provider);
  config.anchor_prompt = options.anchor;
  config.seed = seed;
  config.residual_magnitude = options.residual;
  config.endpoint = resolve_endpoint(options.endpoint);
  config.image_dir = options.image_dir;
  config.timeout_ms = options.timeout_ms;
  config.max_retries = options.max_retries;
  config.max_in_flight = options.max_in_flight;
  switch (config.kind) {
    case ProviderKind::kSynthetic: {
      const std::size_t d = dimension != 0 ? dimension : (manifest ? manifest->dimension : 0);
      if (d == 0) throw ValidationError("synthetic provider needs --manifest or --dimension");
      return std::make_unique<SyntheticProvider>(config, d, std::move(manifest));
    }
    case ProviderKind::kManifest: {
      if (!manifest) throw ValidationError("manifest provider needs --manifest");
      std::optional<TextEmbeddingTable> table;
      if (!options.text_table.empty()) table = load_text_table(options.text_table);
      return std::make_unique<ManifestProvider>(config, std::move(manifest), std::move(table));
    }
    case ProviderKind::kRemote:
      return std::make_unique<RemoteProvider>(config);
  }
  throw ValidationError("unknown provider");
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline void run_generate_world(const GenerateWorldCommand& cmd) {
  WorldConfig config;
  config.dimension = cmd.dimension;
  config.images = cmd.images;
  config.vocabulary = cmd.vocabulary;
  config.min_tags = cmd.min_tags;
  config.max_tags = cmd.max_tags;
  config.private_fraction = cmd.private_fraction;
  config.marker = cmd.marker;
  config.residual_magnitude = cmd.residual;
  config.seed = cmd.seed;
  config.validate();
  const auto out = detail::prepare_out_dir(cmd.out_dir);
  detail::echo_config(out, "generate-world", cmd);
  const DatasetManifest world = generate_world(config);
  if (cmd.sidecar) {
    save_manifest_with_sidecar(world, out / "manifest.jsonl");
  } else {
    save_manifest(world, out / "manifest.jsonl");
  }
}

inline void run_train(const TrainCommand& cmd) {
  TrainConfig config;
  config.epochs = cmd.epochs;
  config.learning_rate = cmd.learning_rate;
  config.batch_size = cmd.batch_size;
  config.seed = cmd.seed;
  config.validate();
  const auto manifest = detail::require_manifest(cmd.manifest);
  const auto out = detail::prepare_out_dir(cmd.out_dir);
  detail::echo_config(out, "train", cmd);
  const TrainResult result = train(*manifest, config);
  detail::write_json(out / "weights.json", weights_to_json(result, config));
  detail::write_json(out / "training_log.json", training_log_to_json(result));
}

inline void run_explain(const ExplainCommand& cmd) {
  ExplainOptions options;
  options.scenarios.max_length = static_cast<int>(cmd.s);
  options.scenarios.max_scenarios = cmd.max_scenarios;
  options.scenarios.validate();
  options.selection.q = cmd.q;
  options.selection.subset_exact_limit = cmd.subset_exact_limit;
  options.selection.objectives.clear();
  for (const auto& o : cmd.objectives) options.selection.objectives.push_back(parse_objective(o));
  options.selection.validate();
  options.direction_mode = detail::parse_direction(cmd.direction);

  const auto manifest = detail::require_manifest(cmd.manifest);
  const ClassifierWeights weights = detail::require_weights(cmd.weights);
  const auto provider = make_provider(cmd.provider, cmd.seed, manifest);
  detail::check_dimensions(weights, *provider);
  const auto out = detail::prepare_out_dir(cmd.out_dir);
  detail::echo_config(out, "explain", cmd);

  const std::vector<ExplanationSet> sets = parallel_map(manifest->records.size(), cmd.workers, [&](std::size_t i) {
    return explain_image(manifest->records[i], weights, *provider, options);
  });

  std::ostringstream lines;
  write_explanations(sets, lines, {cmd.include_all});
  detail::write_file(out / "explanations.jsonl", lines.str());

  std::map<std::string, std::size_t> status_counts;
  for (auto st : {ExplanationStatus::kExplained, ExplanationStatus::kNoValid, ExplanationStatus::kNoScenarios,
                  ExplanationStatus::kSkipped}) {
    status_counts[std::string(to_string(st))] = 0;
  }
  std::size_t truncated = 0;
  std::size_t greedy = 0;
  std::size_t warnings = 0;
  for (const auto& s : sets) {
    ++status_counts[std::string(to_string(s.status))];
    truncated += s.scenarios_truncated ? 1 : 0;
    greedy += (s.status == ExplanationStatus::kExplained && s.subset_method == SubsetMethod::kGreedy) ? 1 : 0;
    warnings += s.warnings.size();
  }
  std::vector<CohortEntry> entries;
  for (const auto& s : sets) entries.push_back({s.image_id, s});
  const MetricValue v = validity(EvaluationCohort(std::move(entries)));
  detail::write_json(out / "summary.json",
                     {{"images", sets.size()},
                      {"status_counts", status_counts},
                      {"private_count", sets.size() - status_counts["skipped"]},
                      {"explained_count", status_counts["explained"]},
                      {"V", detail::opt_json(v.value)},
                      {"V_status", v.status},
                      {"scenarios_truncated", truncated},
                      {"greedy_subsets", greedy},
                      {"warnings", warnings}});
}

inline void run_evaluate(const EvaluateCommand& cmd) {
  if (cmd.explanations.empty()) throw ValidationError("--explanations is required");
  std::vector<std::string> methods = cmd.methods;
  if (methods.empty() && cmd.explanations.size() == 1) methods = {"dex"};
  if (methods.size() != cmd.explanations.size()) {
    throw ValidationError("give one --method per --explanations file");
  }
  if (std::set<std::string>(methods.begin(), methods.end()).size() != methods.size()) {
    throw ValidationError("method names must be distinct");
  }
  RobustnessConfig thresholds_check;
  thresholds_check.thresholds = cmd.thresholds;
  thresholds_check.validate();
  MetricOptions options;
  options.diversity = detail::parse_variant(cmd.variant);

  const auto manifest = detail::require_manifest(cmd.manifest);
  const auto provider = make_provider(cmd.provider, cmd.seed, manifest);
  std::vector<std::vector<ExplanationSet>> all_sets;
  for (const auto& path : cmd.explanations) all_sets.push_back(load_explanations(path));
  std::vector<EvaluationCohort> cohorts;
  for (const auto& sets : all_sets) cohorts.push_back(EvaluationCohort::from_sets(*manifest, sets));
  const auto out = detail::prepare_out_dir(cmd.out_dir);
  detail::echo_config(out, "evaluate", cmd);

  std::vector<MetricReport> reports;
  std::vector<std::pair<std::string, std::vector<CurvePoint>>> curves;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    reports.push_back(compute_report(cohorts[m], *provider, options, methods[m]));
    detail::write_json(out / ("report_" + methods[m] + ".json"), to_json(reports.back()));
    std::ostringstream rows;
    write_per_image_csv(reports.back(), rows);
    detail::write_file(out / ("per_image_" + methods[m] + ".csv"), rows.str());
    if (auto curve = validity_at_thresholds(detail::flip_summaries(all_sets[m]), cmd.thresholds)) {
      curves.emplace_back(methods[m], std::move(*curve));
    }
  }
  std::ostringstream figure;
  write_figure_csv(reports, figure);
  detail::write_file(out / "figure.csv", figure.str());
  detail::write_file(out / "thresholds.csv", detail::curve_csv(curves));
}

// Probe spec file:
//   {"linearity": [["a", "b"], ...],
//    "random_linearity": {"pairs": N, "triplets": M},
//    "add_remove": [{"image_id": ..., "add": [...], "remove": [...], "reference": [...]}]}
// Random groups draw distinct tags from the manifest vocabulary with --seed.
inline void run_probe(const ProbeCommand& cmd) {
  if (cmd.spec.empty()) throw ValidationError("--spec is required");
  std::ifstream in(cmd.spec);
  if (!in) throw ValidationError("cannot open probe spec '" + cmd.spec + "'");
  nlohmann::json spec;
  try {
    in >> spec;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed probe spec: ") + e.what());
  }
  if (!spec.is_object()) throw ValidationError("probe spec must be a JSON object");

  std::shared_ptr<DatasetManifest> manifest;
  if (!cmd.manifest.empty()) manifest = detail::require_manifest(cmd.manifest);
  std::vector<std::vector<std::string>> groups =
      spec.value("linearity", std::vector<std::vector<std::string>>{});
  if (spec.contains("random_linearity")) {
    if (!manifest) throw ValidationError("random linearity groups need --manifest");
    std::set<std::string> vocab_set;
    for (const auto& r : manifest->records) vocab_set.insert(r.extracted_tags.begin(), r.extracted_tags.end());
    const std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());
    Rng rng(derive_seed(cmd.seed, "probe"));
    const auto& random = spec["random_linearity"];
    for (const auto& [size, count] : {std::pair<std::size_t, std::size_t>{2, random.value("pairs", 0)},
                                      std::pair<std::size_t, std::size_t>{3, random.value("triplets", 0)}}) {
      if (count > 0 && vocab.size() < size) throw ValidationError("manifest vocabulary too small for probe groups");
      for (std::size_t i = 0; i < count; ++i) {
        std::vector<std::string> pool = vocab;
        rng.shuffle(pool);
        groups.emplace_back(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
      }
    }
  }
  const auto edits = spec.value("add_remove", nlohmann::json::array());
  if (groups.empty() && edits.empty()) throw ValidationError("probe spec contains no probes");

  const auto provider = make_provider(cmd.provider, cmd.seed, manifest, cmd.dimension);
  const auto out = detail::prepare_out_dir(cmd.out_dir);
  detail::echo_config(out, "probe", cmd);
  nlohmann::json report{{"linearity", nullptr}, {"add_remove", nlohmann::json::array()}};
  if (!groups.empty()) report["linearity"] = to_json(linearity_probe(*provider, groups));
  for (const auto& e : edits) {
    report["add_remove"].push_back(to_json(add_remove_probe(
        *provider, e.at("image_id").get<std::string>(), e.value("add", std::vector<std::string>{}),
        e.value("remove", std::vector<std::string>{}), e.value("reference", std::vector<std::string>{}))));
  }
  detail::write_json(out / "probe_report.json", report);
}

inline std::vector<std::string> read_library_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open concept library '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(line);
  }
  return out;
}

inline void run_baseline(const BaselineCommand& cmd) {
  CountexConfig config;
  config.learning_rate = cmd.learning_rate;
  config.max_iterations = cmd.max_iterations;
  config.lambda_identity = cmd.lambda_identity;
  config.lambda_l1 = cmd.lambda_l1;
  config.lambda_l2 = cmd.lambda_l2;
  config.weight_threshold = cmd.threshold;
  if (cmd.sparsity != "signed" && cmd.sparsity != "absolute") {
    throw ValidationError("unknown sparsity comparison '" + cmd.sparsity + "' (expected signed or absolute)");
  }
  config.sparsity_comparison = cmd.sparsity == "signed" ? SparsityComparison::kSigned : SparsityComparison::kAbsolute;
  if (cmd.ranking != "most-negative" && cmd.ranking != "most-positive") {
    throw ValidationError("unknown ranking '" + cmd.ranking + "' (expected most-negative or most-positive)");
  }
  config.ranking = cmd.ranking == "most-negative" ? ConceptRanking::kMostNegative : ConceptRanking::kMostPositive;
  config.validate();
  MetricOptions metric_options;
  metric_options.diversity = detail::parse_variant(cmd.variant);

  const auto manifest = detail::require_manifest(cmd.manifest);
  const ClassifierWeights weights = detail::require_weights(cmd.weights);
  const auto provider = make_provider(cmd.provider, cmd.seed, manifest);
  detail::check_dimensions(weights, *provider);
  std::vector<std::string> concepts;
  if (!cmd.library.empty()) {
    concepts = read_library_file(cmd.library);
  } else if (manifest->concept_library) {
    concepts = *manifest->concept_library;
  }
  if (concepts.empty()) throw ValidationError("concept library is empty");
  const ConceptLibrary library = build_concept_library(*provider, concepts);
  const auto out = detail::prepare_out_dir(cmd.out_dir);
  detail::echo_config(out, "baseline", cmd);

  struct PerImage {
    ExplanationSet set;
    std::optional<nlohmann::json> solution;
  };
  const auto results = parallel_map(manifest->records.size(), cmd.workers, [&](std::size_t i) {
    const ImageRecord& r = manifest->records[i];
    const EmbeddingVector x = provider->embed_image(r.id);
    const Prediction p = predict(weights, x);
    PerImage item;
    if (r.label != PrivacyLabel::kPrivate || p.label != PrivacyLabel::kPrivate) {
      item.set.image_id = r.id;
      item.set.original_label = p.label;
      item.set.original_confidence = p.confidence;
      return item;
    }
    CountexConfig local = config;
    local.seed = derive_seed(cmd.seed, "countex:" + r.id);
    const CountexSolution s = optimize(x, weights, library, local);
    item.set = countex_explanation(r.id, x, weights, library, s, local, cmd.top_k);
    nlohmann::json j = to_json(s, library, local, cmd.top_k);
    j["image_id"] = r.id;
    item.solution = std::move(j);
    return item;
  });

  std::vector<ExplanationSet> sets;
  std::ostringstream solutions;
  for (const auto& item : results) {
    sets.push_back(item.set);
    if (item.solution) solutions << item.solution->dump() << '\n';
  }
  detail::write_file(out / "solutions.jsonl", solutions.str());
  std::ostringstream lines;
  write_explanations(sets, lines);
  detail::write_file(out / "explanations.jsonl", lines.str());
  const MetricReport report =
      compute_report(EvaluationCohort::from_sets(*manifest, sets), *provider, metric_options, "countex");
  detail::write_json(out / "report.json", to_json(report));
  std::ostringstream rows;
  write_per_image_csv(report, rows);
  detail::write_file(out / "per_image.csv", rows.str());
}

inline void run_robustness(const RobustnessCommand& cmd) {
  if (cmd.num_vectors.empty()) throw ValidationError("--num-vectors needs at least one value");
  RobustnessConfig base;
  base.thresholds = cmd.thresholds;
  if (cmd.noise != "unit-norm" && cmd.noise != "sigma") {
    throw ValidationError("unknown noise mode '" + cmd.noise + "' (expected unit-norm or sigma)");
  }
  base.noise = cmd.noise == "unit-norm" ? NoiseMode::kUnitNorm : NoiseMode::kSigma;
  base.sigma = cmd.sigma;
  base.validate();

  const auto manifest = detail::require_manifest(cmd.manifest);
  const ClassifierWeights weights = detail::require_weights(cmd.weights);
  const auto provider = make_provider(cmd.provider, cmd.seed, manifest);
  detail::check_dimensions(weights, *provider);
  std::optional<std::vector<ExplanationSet>> dex_sets;
  if (!cmd.explanations.empty()) {
    dex_sets = load_explanations(cmd.explanations);
    EvaluationCohort::from_sets(*manifest, *dex_sets);
  }
  const auto out = detail::prepare_out_dir(cmd.out_dir);
  detail::echo_config(out, "robustness", cmd);

  const auto cohort = detail::private_cohort(*manifest, weights, *provider);
  std::vector<std::pair<std::string, std::vector<CurvePoint>>> all_curves;
  nlohmann::json summary = nlohmann::json::object();
  summary["private_count"] = cohort.size();
  auto record_curve = [&](const std::string& method, const std::vector<FlipSummary>& flips,
                          double pooled_sum, std::size_t pooled_count) {
    const auto curve = validity_at_thresholds(flips, cmd.thresholds);
    nlohmann::json s{{"mean_flip_confidence", pooled_count ? nlohmann::json(pooled_sum / pooled_count) : nullptr},
                     {"flips", pooled_count}};
    if (!curve) {
      s["curve"] = "undefined: empty cohort";
    } else {
      std::ostringstream csv;
      csv << "threshold,method,validity\n";
      write_curve_csv(method, *curve, csv);
      detail::write_file(out / ("curve_" + method + ".csv"), csv.str());
      all_curves.emplace_back(method, *curve);
    }
    summary["methods"][method] = s;
  };

  for (std::size_t n : cmd.num_vectors) {
    const auto per_image = parallel_map(cohort.size(), cmd.workers, [&](std::size_t i) {
      RobustnessConfig local = base;
      local.num_vectors = n;
      local.seed = derive_seed(cmd.seed, "robustness:" + cohort[i]->id);
      return random_flips(provider->embed_image(cohort[i]->id), weights, local);
    });
    std::vector<FlipSummary> flips;
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : per_image) {
      flips.push_back(r.summary);
      for (double c : r.flip_confidences) sum += c;
      count += r.flip_confidences.size();
    }
    record_curve("rand_" + std::to_string(n), flips, sum, count);
  }
  if (dex_sets) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : *dex_sets) {
      if (!s.in_private_cohort()) continue;
      for (const auto& c : s.best) {
        sum += c.confidence;
        ++count;
      }
    }
    record_curve("dex", detail::flip_summaries(*dex_sets), sum, count);
  }
  detail::write_file(out / "curves.csv", detail::curve_csv(all_curves));
  detail::write_json(out / "summary.json", summary);
}

// Re-runs the command recorded in a config echo.
inline void run_from_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
    const std::string command = j.at("command").get<std::string>();
    const auto& o = j.at("options");
    if (command == "generate-world") return run_generate_world(o.get<GenerateWorldCommand>());
    if (command == "train") return run_train(o.get<TrainCommand>());
    if (command == "explain") return run_explain(o.get<ExplainCommand>());
    if (command == "evaluate") return run_evaluate(o.get<EvaluateCommand>());
    if (command == "probe") return run_probe(o.get<ProbeCommand>());
    if (command == "baseline") return run_baseline(o.get<BaselineCommand>());
    if (command == "robustness") return run_robustness(o.get<RobustnessCommand>());
    throw ValidationError("unknown command '" + command + "' in config");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
}

}  // namespace dex

#endif  // DEX_COMMANDS_HPP
