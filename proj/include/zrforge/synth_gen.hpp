/*
 * Copyright 2026 The zrforge Authors.
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


#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "zrforge/kg_data.hpp"

namespace zrforge {

// Synthetic TKG with relation clusters and per-pair cyclic cluster scripts.
// Relation j of cluster c has id c * relations_per_cluster + j and text
// "cluster{c} relation{j}".
struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t n_entities = 200;
  std::size_t n_clusters = 6;
  std::size_t relations_per_cluster = 4;
  std::vector<std::vector<std::size_t>> scripts = {{0, 1}, {2, 3}, {4, 5}};
  // Pair k has subject k / |scripts| and script k % |scripts|.
  std::size_t n_pairs = 150;
  std::size_t train_steps = 60;
  std::size_t eval_steps = 20;
  double p = 0.5;
  std::size_t holdout_per_cluster = 1;
  // Probability that an eval emission uses one of the cluster's held-out
  // relations instead of a regular one.
  double holdout_share = 0.1;

  // Throws std::invalid_argument on an inconsistent config.
  void validate() const;
};

struct PlantedPair {
  EntityId subject = 0;
  EntityId object = 0;
  std::size_t script = 0;
  std::size_t phase = 0;
};

struct PlantedTruth {
  std::vector<std::size_t> relation_cluster;
  std::vector<RelationId> holdout;
  std::vector<std::vector<std::size_t>> scripts;
  std::vector<PlantedPair> pairs;
  std::size_t train_steps = 0;

  std::size_t cluster_at(std::size_t pair, std::size_t t) const {
    const auto& pr = pairs.at(pair);
    const auto& s = scripts.at(pr.script);
    return s[(t + pr.phase) % s.size()];
  }
};

struct SynthOutput {
  FactSet facts;
  PlantedTruth truth;
};

// Throws DataError when no held-out relation ends up in an eval fact.
SynthOutput generate(const SynthConfig& config);

// Writes facts.tsv, relations.tsv and planted.json.
void write_synth(const std::filesystem::path& dir, const SynthOutput& out);

}  // namespace zrforge
