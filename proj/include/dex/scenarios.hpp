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

#ifndef DEX_SCENARIOS_HPP
#define DEX_SCENARIOS_HPP

#include <algorithm>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dex/core.hpp"

namespace dex {

struct ScenarioConfig {
  // Longest scenario, in tags.
  int max_length = 3;
  std::size_t max_scenarios = 10000;

  void validate() const {
    if (max_length < 1) throw ValidationError("scenario max length must be at least 1");
    if (max_scenarios == 0) throw ValidationError("scenario cap must be positive");
  }
};

enum class ScenarioStatus { kOk, kNoScenarios, kTruncated };

inline std::string_view to_string(ScenarioStatus s) {
  switch (s) {
    case ScenarioStatus::kOk: return "ok";
    case ScenarioStatus::kNoScenarios: return "no-scenarios";
    case ScenarioStatus::kTruncated: return "truncated";
  }
  return "unknown";
}

struct ScenarioSet {
  std::vector<Scenario> scenarios;
  ScenarioStatus status = ScenarioStatus::kOk;

  bool truncated() const { return status == ScenarioStatus::kTruncated; }
};

// All 1..s-subsets of the tags, ordered by length and then lexicographically
// over the sorted tag tuple. Stops at the cap and flags the result.
inline ScenarioSet generate_scenarios(const std::vector<std::string>& tags, const ScenarioConfig& config) {
  config.validate();
  ScenarioSet out;
  std::vector<std::string> sorted = canonicalize_tags(tags);
  std::sort(sorted.begin(), sorted.end());
  if (sorted.empty()) {
    out.status = ScenarioStatus::kNoScenarios;
    return out;
  }

  const std::size_t n = sorted.size();
  const std::size_t longest = std::min<std::size_t>(static_cast<std::size_t>(config.max_length), n);
  std::vector<std::size_t> idx;
  for (std::size_t len = 1; len <= longest; ++len) {
    // Lexicographic walk over index combinations of size len.
    idx.resize(len);
    for (std::size_t i = 0; i < len; ++i) idx[i] = i;
    while (true) {
      if (out.scenarios.size() == config.max_scenarios) {
        out.status = ScenarioStatus::kTruncated;
        return out;
      }
      std::vector<std::string> combo;
      combo.reserve(len);
      for (std::size_t i : idx) combo.push_back(sorted[i]);
      out.scenarios.emplace_back(std::move(combo));

      std::size_t pos = len;
      while (pos > 0 && idx[pos - 1] == n - len + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < len; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return out;
}

}  // namespace dex

#endif  // DEX_SCENARIOS_HPP
