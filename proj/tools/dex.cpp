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

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dex/commands.hpp"

namespace {

void add_provider_flags(CLI::App* app, dex::ProviderOptions& p) {
  app->add_option("--provider", p.provider, "Embedding source")
      ->check(CLI::IsMember({"manifest", "synthetic", "remote"}))
      ->capture_default_str();
  app->add_option("--endpoint", p.endpoint,
                  std::string("Bridge URL for the remote provider (falls back to $") + dex::kEndpointEnvVar + ")");
  app->add_option("--text-table", p.text_table, "Text embedding table for the manifest provider");
  app->add_option("--image-dir", p.image_dir, "Image directory for the remote provider");
  app->add_option("--anchor", p.anchor, "Anchor prompt")->capture_default_str();
  app->add_option("--residual", p.residual, "Synthetic per-image residual magnitude")->capture_default_str();
  app->add_option("--timeout-ms", p.timeout_ms, "Remote request timeout")->capture_default_str();
  app->add_option("--max-retries", p.max_retries, "Remote retries on transient failures")->capture_default_str();
  app->add_option("--max-in-flight", p.max_in_flight, "Remote concurrent request cap")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counterfactual explanations for linear image-privacy classifiers"};
  app.require_subcommand(1);

  dex::GenerateWorldCommand world;
  auto* gen = app.add_subcommand("generate-world", "Write a synthetic tagged dataset");
  gen->add_option("--out-dir", world.out_dir)->required();
  gen->add_option("--seed", world.seed)->capture_default_str();
  gen->add_option("--dimension", world.dimension)->capture_default_str();
  gen->add_option("--images", world.images)->capture_default_str();
  gen->add_option("--vocabulary", world.vocabulary)->capture_default_str();
  gen->add_option("--min-tags", world.min_tags)->capture_default_str();
  gen->add_option("--max-tags", world.max_tags)->capture_default_str();
  gen->add_option("--private-fraction", world.private_fraction)->capture_default_str();
  gen->add_option("--marker", world.marker, "Tag that makes an image private")->capture_default_str();
  gen->add_option("--residual", world.residual)->capture_default_str();
  gen->add_flag("--sidecar", world.sidecar, "Store embeddings in a binary sidecar file");

  dex::TrainCommand train;
  auto* tr = app.add_subcommand("train", "Train the linear privacy classifier");
  tr->add_option("--manifest", train.manifest)->required();
  tr->add_option("--out-dir", train.out_dir)->required();
  tr->add_option("--seed", train.seed)->capture_default_str();
  tr->add_option("--epochs", train.epochs)->capture_default_str();
  tr->add_option("--lr", train.learning_rate)->capture_default_str();
  tr->add_option("--batch-size", train.batch_size)->capture_default_str();

  dex::ExplainCommand explain;
  auto* ex = app.add_subcommand("explain", "Generate counterfactual explanation sets");
  ex->add_option("--manifest", explain.manifest)->required();
  ex->add_option("--weights", explain.weights)->required();
  ex->add_option("--out-dir", explain.out_dir)->required();
  ex->add_option("--seed", explain.seed, "Synthetic provider seed")->capture_default_str();
  add_provider_flags(ex, explain.provider);
  ex->add_option("--s", explain.s, "Maximum scenario length")->capture_default_str();
  ex->add_option("--max-scenarios", explain.max_scenarios)->capture_default_str();
  ex->add_option("--q", explain.q, "Explanations kept per image")->capture_default_str();
  ex->add_option("--objectives", explain.objectives)->delimiter(',')->capture_default_str();
  ex->add_option("--subset-exact-limit", explain.subset_exact_limit)->capture_default_str();
  ex->add_option("--direction", explain.direction)
      ->check(CLI::IsMember({"joined", "per-tag"}))
      ->capture_default_str();
  ex->add_flag("--include-all", explain.include_all, "Also write all, valid and Pareto candidates");
  ex->add_option("--workers", explain.workers)->capture_default_str();

  dex::EvaluateCommand evaluate;
  auto* ev = app.add_subcommand("evaluate", "Score explanation files");
  ev->add_option("--manifest", evaluate.manifest)->required();
  ev->add_option("--explanations", evaluate.explanations, "Explanation file (repeatable)")->required();
  ev->add_option("--method", evaluate.methods, "Method name per explanation file");
  ev->add_option("--out-dir", evaluate.out_dir)->required();
  ev->add_option("--seed", evaluate.seed)->capture_default_str();
  add_provider_flags(ev, evaluate.provider);
  ev->add_option("--variant", evaluate.variant, "Diversity normalization")
      ->check(CLI::IsMember({"literal", "unordered-mean"}))
      ->capture_default_str();
  ev->add_option("--thresholds", evaluate.thresholds)->delimiter(',')->capture_default_str();

  dex::ProbeCommand probe;
  auto* pr = app.add_subcommand("probe", "Run compositionality probes");
  pr->add_option("--spec", probe.spec)->required();
  pr->add_option("--manifest", probe.manifest);
  pr->add_option("--dimension", probe.dimension, "Synthetic dimension when no manifest is given");
  pr->add_option("--out-dir", probe.out_dir)->required();
  pr->add_option("--seed", probe.seed)->capture_default_str();
  add_provider_flags(pr, probe.provider);

  dex::BaselineCommand baseline;
  auto* bl = app.add_subcommand("baseline", "Run the concept-weight optimization baseline");
  bl->add_option("--manifest", baseline.manifest)->required();
  bl->add_option("--weights", baseline.weights)->required();
  bl->add_option("--library", baseline.library, "Concept list, one per line (default: manifest library)");
  bl->add_option("--out-dir", baseline.out_dir)->required();
  bl->add_option("--seed", baseline.seed)->capture_default_str();
  add_provider_flags(bl, baseline.provider);
  bl->add_option("--lr", baseline.learning_rate)->capture_default_str();
  bl->add_option("--max-iter", baseline.max_iterations)->capture_default_str();
  bl->add_option("--lambda-id", baseline.lambda_identity)->capture_default_str();
  bl->add_option("--lambda-l1", baseline.lambda_l1)->capture_default_str();
  bl->add_option("--lambda-l2", baseline.lambda_l2)->capture_default_str();
  bl->add_option("--threshold", baseline.threshold, "Weight threshold for sparsity")->capture_default_str();
  bl->add_option("--top-k", baseline.top_k)->capture_default_str();
  bl->add_option("--sparsity", baseline.sparsity)
      ->check(CLI::IsMember({"signed", "absolute"}))
      ->capture_default_str();
  bl->add_option("--ranking", baseline.ranking)
      ->check(CLI::IsMember({"most-negative", "most-positive"}))
      ->capture_default_str();
  bl->add_option("--variant", baseline.variant)
      ->check(CLI::IsMember({"literal", "unordered-mean"}))
      ->capture_default_str();
  bl->add_option("--workers", baseline.workers)->capture_default_str();

  dex::RobustnessCommand robust;
  auto* rb = app.add_subcommand("robustness", "Random-perturbation controls and validity curves");
  rb->add_option("--manifest", robust.manifest)->required();
  rb->add_option("--weights", robust.weights)->required();
  rb->add_option("--explanations", robust.explanations, "Explanation file for the dex curve");
  rb->add_option("--out-dir", robust.out_dir)->required();
  rb->add_option("--seed", robust.seed)->capture_default_str();
  add_provider_flags(rb, robust.provider);
  rb->add_option("--num-vectors", robust.num_vectors)->delimiter(',')->capture_default_str();
  rb->add_option("--noise", robust.noise)->check(CLI::IsMember({"unit-norm", "sigma"}))->capture_default_str();
  rb->add_option("--sigma", robust.sigma)->capture_default_str();
  rb->add_option("--thresholds", robust.thresholds)->delimiter(',')->capture_default_str();
  rb->add_option("--workers", robust.workers)->capture_default_str();

  std::string config_path;
  auto* rr = app.add_subcommand("rerun", "Replay a config.json written by an earlier run");
  rr->add_option("config", config_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) dex::run_generate_world(world);
    if (*tr) dex::run_train(train);
    if (*ex) dex::run_explain(explain);
    if (*ev) dex::run_evaluate(evaluate);
    if (*pr) dex::run_probe(probe);
    if (*bl) dex::run_baseline(baseline);
    if (*rb) dex::run_robustness(robust);
    if (*rr) dex::run_from_config(config_path);
  } catch (const dex::Error& e) {
    std::cerr << "dex: " << e.what() << '\n';
    return e.is_validation() ? 1 : 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "dex: malformed input: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "dex: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
