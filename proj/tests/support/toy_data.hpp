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

#include <string>
#include <vector>

#include "zrforge/kg_data.hpp"
#include "zrforge/rel_semantics.hpp"
#include "zrforge/rng.hpp"

namespace zrforge::testing {

// Entities e0.., relations "rel{j} word{j % 2}", timestamps 0..n_t-1, given
// splits and unseen base relations; reciprocals added.
inline TkgDataset toy_dataset(std::size_t n_ent, std::size_t n_rel, std::size_t n_t, std::vector<Quadruple> train,
                              std::vector<Quadruple> valid, std::vector<Quadruple> test, Timestamp first_eval,
                              std::vector<RelationId> unseen = {}) {
  TkgDataset d;
  for (std::size_t i = 0; i < n_ent; ++i) d.entities.intern("e" + std::to_string(i));
  Vocabulary rels;
  for (std::size_t j = 0; j < n_rel; ++j) rels.intern("rel" + std::to_string(j) + " word" + std::to_string(j % 2));
  d.relations = RelationVocab(std::move(rels));
  std::vector<std::string> steps;
  for (std::size_t t = 0; t < n_t; ++t) steps.push_back(std::to_string(t));
  d.timeline = Timeline(std::move(steps));
  d.train = std::move(train);
  d.valid = std::move(valid);
  d.test = std::move(test);
  d.first_eval = first_eval;
  d.relations.set_unseen(unseen);
  add_reciprocals(d);
  d.validate();
  return d;
}

// Small random dataset: 6 entities, relations 0..2 seen and 3 unseen, 8
// timestamps with evaluation from 6.
inline TkgDataset random_toy(std::uint64_t seed, std::size_t n_train = 50) {
  SplitMix64 rng(seed);
  std::vector<Quadruple> train, valid, test;
  auto draw = [&](RelationId r, Timestamp t) {
    const auto s = static_cast<EntityId>(rng.below(6));
    auto o = static_cast<EntityId>(rng.below(5));
    if (o >= s) ++o;
    return Quadruple{s, r, o, t};
  };
  // Every entity appears in train.
  for (EntityId e = 0; e < 6; ++e) train.push_back({e, 0, (e + 1) % 6, static_cast<Timestamp>(e)});
  while (train.size() < n_train) {
    const auto q = draw(static_cast<RelationId>(rng.below(3)), static_cast<Timestamp>(rng.below(6)));
    if (std::find(train.begin(), train.end(), q) == train.end()) train.push_back(q);
  }
  for (int i = 0; i < 8; ++i) valid.push_back(draw(static_cast<RelationId>(rng.below(3)), 6 + static_cast<Timestamp>(rng.below(2))));
  for (int i = 0; i < 4; ++i) test.push_back(draw(3, 6 + static_cast<Timestamp>(rng.below(2))));
  std::sort(valid.begin(), valid.end());
  valid.erase(std::unique(valid.begin(), valid.end()), valid.end());
  std::sort(test.begin(), test.end());
  test.erase(std::unique(test.begin(), test.end()), test.end());
  return toy_dataset(6, 4, 8, std::move(train), std::move(valid), std::move(test), 6, {3});
}

inline TextStore toy_texts(const TkgDataset& d, std::uint32_t width = 8) { return mock_store(d.relations, width, 0); }

}  // namespace zrforge::testing
