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

// JSON Lines form of explanation sets. The best set always carries its
// counterfactual embeddings; the intermediate lists are written in full only
// on request and are otherwise summarized by their sizes.

#ifndef DEX_EXPLANATION_IO_HPP
#define DEX_EXPLANATION_IO_HPP

#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dex/core.hpp"

namespace dex {

struct ExplanationIoOptions {
  bool include_all_candidates = false;
};

inline nlohmann::json to_json(const Candidate& c, bool with_embedding = true) {
  nlohmann::json j{{"tags", c.scenario.tags()},
                   {"prompt", c.scenario.prompt()},
                   {"predicted_label", std::string(to_string(c.predicted_label))},
                   {"confidence", c.confidence},
                   {"proximity", c.proximity},
                   {"concept_count", c.concept_count}};
  if (with_embedding) j["counterfactual_embedding"] = c.counterfactual_embedding.raw();
  return j;
}

inline Candidate candidate_from_json(const nlohmann::json& j) {
  Candidate c;
  c.scenario = Scenario(j.at("tags").get<std::vector<std::string>>());
  if (j.contains("counterfactual_embedding")) {
    c.counterfactual_embedding = EmbeddingVector(j.at("counterfactual_embedding").get<std::vector<double>>());
  }
  c.predicted_label = parse_label(j.at("predicted_label").get<std::string>());
  c.confidence = j.at("confidence").get<double>();
  c.proximity = j.at("proximity").get<double>();
  c.concept_count = j.at("concept_count").get<std::size_t>();
  return c;
}

namespace detail {

inline nlohmann::json candidates_json(const std::vector<Candidate>& cs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cs) arr.push_back(to_json(c));
  return arr;
}

inline std::vector<Candidate> candidates_from_json(const nlohmann::json& arr) {
  std::vector<Candidate> out;
  for (const auto& c : arr) out.push_back(candidate_from_json(c));
  return out;
}

}  // namespace detail

inline nlohmann::json to_json(const ExplanationSet& s, const ExplanationIoOptions& options = {}) {
  nlohmann::json j{{"image_id", s.image_id},
                   {"status", std::string(to_string(s.status))},
                   {"original_label", std::string(to_string(s.original_label))},
                   {"original_confidence", s.original_confidence},
                   {"counts",
                    {{"all", s.candidates_all.size()},
                     {"valid", s.candidates_valid.size()},
                     {"pareto", s.pareto.size()},
                     {"best", s.best.size()}}},
                   {"best", detail::candidates_json(s.best)},
                   {"subset_method", std::string(to_string(s.subset_method))},
                   {"subset_objective", s.subset_objective},
                   {"scenarios_truncated", s.scenarios_truncated},
                   {"warnings", s.warnings}};
  if (options.include_all_candidates) {
    j["candidates_all"] = detail::candidates_json(s.candidates_all);
    j["candidates_valid"] = detail::candidates_json(s.candidates_valid);
    j["pareto"] = detail::candidates_json(s.pareto);
  }
  return j;
}

inline ExplanationSet explanation_set_from_json(const nlohmann::json& j) {
  ExplanationSet s;
  s.image_id = j.at("image_id").get<std::string>();
  s.status = parse_explanation_status(j.at("status").get<std::string>());
  s.original_label = parse_label(j.at("original_label").get<std::string>());
  s.original_confidence = j.at("original_confidence").get<double>();
  s.best = detail::candidates_from_json(j.at("best"));
  const std::string method = j.value("subset_method", std::string("exact"));
  if (method != "exact" && method != "greedy") throw ValidationError("unknown subset method '" + method + "'");
  s.subset_method = method == "exact" ? SubsetMethod::kExact : SubsetMethod::kGreedy;
  s.subset_objective = j.value("subset_objective", 0.0);
  s.scenarios_truncated = j.value("scenarios_truncated", false);
  s.warnings = j.value("warnings", std::vector<std::string>{});
  if (j.contains("candidates_all")) s.candidates_all = detail::candidates_from_json(j.at("candidates_all"));
  if (j.contains("candidates_valid")) s.candidates_valid = detail::candidates_from_json(j.at("candidates_valid"));
  if (j.contains("pareto")) s.pareto = detail::candidates_from_json(j.at("pareto"));
  return s;
}

inline void write_explanations(const std::vector<ExplanationSet>& sets, std::ostream& out,
                               const ExplanationIoOptions& options = {}) {
  for (const auto& s : sets) out << to_json(s, options).dump() << '\n';
}

inline std::vector<ExplanationSet> read_explanations(std::istream& in) {
  std::vector<ExplanationSet> out;
  std::string line;
  std::size_t record = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(explanation_set_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(record, "explanation", e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(record, "explanation", e.what());
    }
    ++record;
  }
  return out;
}

inline std::vector<ExplanationSet> load_explanations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open explanations file '" + path.string() + "'");
  return read_explanations(in);
}

}  // namespace dex

#endif  // DEX_EXPLANATION_IO_HPP
