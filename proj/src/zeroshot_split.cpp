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


#include "zrforge/zeroshot_split.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "zrforge/error.hpp"

namespace zrforge {

TemporalSplit temporal_split(std::span<const Quadruple> facts, Timestamp split_timestamp) {
  TemporalSplit out;
  for (const auto& q : facts) (q.t < split_timestamp ? out.train : out.eval).push_back(q);
  if (out.train.empty()) throw DataError("temporal split leaves the training side empty");
  if (out.eval.empty()) throw DataError("temporal split leaves the evaluation side empty");
  return out;
}

Timestamp split_timestamp_for_fraction(std::span<const Quadruple> facts, double fraction) {
  if (facts.empty()) throw DataError("no facts to split");
  if (!(fraction > 0.0 && fraction < 1.0)) throw std::invalid_argument("train fraction must lie in (0, 1)");
  Timestamp max_t = 0;
  for (const auto& q : facts) max_t = std::max(max_t, q.t);
  std::vector<std::size_t> per_t(max_t + 1, 0);
  for (const auto& q : facts) ++per_t[q.t];
  const auto need = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(facts.size())));
  std::size_t acc = 0;
  for (Timestamp t = 0; t <= max_t; ++t) {
    acc += per_t[t];
    if (acc >= need) return t + 1;
  }
  return max_t + 1;
}

std::vector<Quadruple> prune_unseen_entities(std::span<const Quadruple> train, std::span<const Quadruple> eval) {
  EntityId max_e = 0;
  for (const auto& q : train) max_e = std::max({max_e, q.s, q.o});
  std::vector<bool> known(static_cast<std::size_t>(max_e) + 1, false);
  for (const auto& q : train) known[q.s] = known[q.o] = true;
  auto is_known = [&](EntityId e) { return e < known.size() && known[e]; };
  std::vector<Quadruple> out;
  for (const auto& q : eval) {
    if (is_known(q.s) && is_known(q.o)) out.push_back(q);
  }
  return out;
}

std::vector<std::size_t> relation_frequencies(std::span<const Quadruple> facts, std::size_t num_relations) {
  std::vector<std::size_t> freq(num_relations, 0);
  for (const auto& q : facts) ++freq.at(q.r);
  return freq;
}

ZeroShotPartition zero_shot_partition(std::span<const Quadruple> train, std::span<const Quadruple> eval,
                                      std::size_t num_relations, std::size_t freq_threshold) {
  if (freq_threshold < 1) throw std::invalid_argument("frequency threshold must be >= 1");
  ZeroShotPartition p;
  p.eval_frequency = relation_frequencies(eval, num_relations);
  const auto train_freq = relation_frequencies(train, num_relations);
  for (RelationId r = 0; r < num_relations; ++r) {
    const std::size_t f = p.eval_frequency[r];
    if (f > 0 && f < freq_threshold) {
      p.unseen.push_back(r);
    } else if (f >= freq_threshold && train_freq[r] == 0) {
      p.unseen.push_back(r);
      p.reclassified.push_back(r);
    } else {
      p.seen.push_back(r);
    }
  }
  p.empty_unseen_warning = p.unseen.empty();
  return p;
}

TkgDataset finalize(const FactSet& source, std::span<const Quadruple> train, std::span<const Quadruple> eval,
                    const ZeroShotPartition& partition, Timestamp first_eval) {
  const std::size_t n_rel = source.relations.base_count();
  std::vector<bool> unseen(n_rel, false);
  for (const auto r : partition.unseen) unseen.at(r) = true;

  std::vector<Quadruple> g_train, g_valid, g_test;
  for (const auto& q : train) {
    if (!unseen[q.r]) g_train.push_back(q);
  }
  // Entities that only occurred in zero-shot training facts are gone now.
  const auto kept_eval = prune_unseen_entities(g_train, eval);
  for (const auto& q : kept_eval) (unseen[q.r] ? g_test : g_valid).push_back(q);

  if (g_train.empty()) throw DataError("split G_train is empty");
  if (g_valid.empty()) throw DataError("split G_valid is empty");
  if (g_test.empty()) throw DataError("split G_test is empty (no zero-shot relation has evaluation facts)");

  // Compact vocabularies, preserving the original (first-seen) order.
  std::vector<bool> used_e(source.entities.size(), false), used_r(n_rel, false);
  for (const auto* split : {&g_train, &g_valid, &g_test}) {
    for (const auto& q : *split) {
      used_e[q.s] = used_e[q.o] = true;
      used_r[q.r] = true;
    }
  }
  TkgDataset d;
  std::vector<EntityId> e_map(source.entities.size());
  for (EntityId e = 0; e < source.entities.size(); ++e) {
    if (used_e[e]) e_map[e] = d.entities.intern(source.entities.label(e));
  }
  Vocabulary rel_vocab;
  std::vector<RelationId> r_map(n_rel);
  std::vector<RelationId> new_unseen;
  for (RelationId r = 0; r < n_rel; ++r) {
    if (!used_r[r]) continue;
    r_map[r] = rel_vocab.intern(source.relations.text(r));
    if (unseen[r]) new_unseen.push_back(r_map[r]);
  }
  d.relations = RelationVocab(std::move(rel_vocab));
  d.relations.set_unseen(new_unseen);
  d.timeline = source.timeline;
  d.first_eval = first_eval;
  auto remap = [&](const std::vector<Quadruple>& in) {
    std::vector<Quadruple> out;
    out.reserve(in.size());
    for (const auto& q : in) out.push_back({e_map[q.s], r_map[q.r], e_map[q.o], q.t});
    return out;
  };
  d.train = remap(g_train);
  d.valid = remap(g_valid);
  d.test = remap(g_test);
  d.validate();
  return d;
}

SplitResult build_zero_shot_dataset(const FactSet& source, const SplitConfig& config) {
  if (config.split_timestamp == 0 || config.split_timestamp >= source.timeline.size()) {
    throw DataError("split timestamp must lie strictly inside the timeline");
  }
  if (config.freq_threshold < 1) throw DataError("frequency threshold must be >= 1");
  auto split = temporal_split(source.facts, config.split_timestamp);
  const auto eval = prune_unseen_entities(split.train, split.eval);
  SplitResult result;
  result.pruned_eval_facts = split.eval.size() - eval.size();
  result.partition = zero_shot_partition(split.train, eval, source.relations.base_count(), config.freq_threshold);
  result.dataset = finalize(source, split.train, eval, result.partition, config.split_timestamp);
  result.pruned_eval_facts =
      split.eval.size() - result.dataset.valid.size() - result.dataset.test.size();
  return result;
}

}  // namespace zrforge
