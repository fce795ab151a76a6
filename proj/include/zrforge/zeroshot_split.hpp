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

#include <span>
#include <string>
#include <vector>

#include "zrforge/kg_data.hpp"

namespace zrforge {

struct SplitConfig {
  Timestamp split_timestamp = 0;  // first evaluation timestamp
  std::size_t freq_threshold = 40;
};

struct TemporalSplit {
  std::vector<Quadruple> train;
  std::vector<Quadruple> eval;
};

// Facts with t < split_timestamp go to train, the rest to eval. Throws
// DataError when either side ends up empty.
TemporalSplit temporal_split(std::span<const Quadruple> facts, Timestamp split_timestamp);

// Smallest split timestamp whose train side holds at least `fraction` of
// the facts.
Timestamp split_timestamp_for_fraction(std::span<const Quadruple> facts, double fraction);

// Drops eval facts touching an entity that never occurs in train.
std::vector<Quadruple> prune_unseen_entities(std::span<const Quadruple> train, std::span<const Quadruple> eval);

// Occurrence count of every relation id in [0, num_relations) within facts.
std::vector<std::size_t> relation_frequencies(std::span<const Quadruple> facts, std::size_t num_relations);

struct ZeroShotPartition {
  std::vector<RelationId> seen;
  std::vector<RelationId> unseen;
  // Relations frequent in eval that never occur in train.
  std::vector<RelationId> reclassified;
  std::vector<std::size_t> eval_frequency;
  bool empty_unseen_warning = false;
};

// r is zero-shot iff 0 < freq_eval(r) < threshold, or r is frequent in eval
// but absent from train.
ZeroShotPartition zero_shot_partition(std::span<const Quadruple> train, std::span<const Quadruple> eval,
                                      std::size_t num_relations, std::size_t freq_threshold);

// Assembles G_train / G_valid / G_test, drops eval facts whose entities only
// occurred in removed train facts, and compacts the entity and relation
// vocabularies to what the splits use. Throws DataError naming an empty split.
TkgDataset finalize(const FactSet& source, std::span<const Quadruple> train, std::span<const Quadruple> eval,
                    const ZeroShotPartition& partition, Timestamp first_eval);

struct SplitResult {
  TkgDataset dataset;
  ZeroShotPartition partition;
  std::size_t pruned_eval_facts = 0;
};

// The whole construction: temporal split, unseen-entity pruning, frequency
// thresholding, zero-shot partition.
SplitResult build_zero_shot_dataset(const FactSet& source, const SplitConfig& config);

}  // namespace zrforge
