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


#include "zrforge/synth_gen.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "zrforge/error.hpp"
#include "zrforge/rng.hpp"

namespace zrforge {

void SynthConfig::validate() const {
  if (n_clusters * relations_per_cluster < 2) throw std::invalid_argument("need at least two relations");
  if (holdout_per_cluster >= relations_per_cluster) {
    throw std::invalid_argument("holdout_per_cluster must be below relations_per_cluster");
  }
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("emission probability must lie in (0, 1]");
  if (!(holdout_share >= 0.0 && holdout_share <= 1.0)) throw std::invalid_argument("holdout_share must lie in [0, 1]");
  if (scripts.empty()) throw std::invalid_argument("no scripts");
  for (const auto& s : scripts) {
    if (s.empty()) throw std::invalid_argument("empty script");
    for (const auto c : s) {
      if (c >= n_clusters) throw std::invalid_argument("script references cluster " + std::to_string(c));
    }
  }
  const std::size_t n_subjects = (n_pairs + scripts.size() - 1) / scripts.size();
  if (n_subjects > n_entities) throw std::invalid_argument("more subjects than entities");
  if (n_entities < scripts.size() + 1) throw std::invalid_argument("too few entities for distinct objects");
  if (train_steps == 0) throw std::invalid_argument("train_steps must be positive");
}

SynthOutput generate(const SynthConfig& config) {
  config.validate();
  const std::size_t m = config.relations_per_cluster;
  const std::size_t n_rel = config.n_clusters * m;
  const std::size_t n_scripts = config.scripts.size();

  SynthOutput out;
  auto& truth = out.truth;
  truth.scripts = config.scripts;
  truth.train_steps = config.train_steps;
  truth.relation_cluster.resize(n_rel);

  Vocabulary entities, relations;
  for (std::size_t i = 0; i < config.n_entities; ++i) entities.intern("e" + std::to_string(i));
  std::vector<std::vector<RelationId>> regular(config.n_clusters), held(config.n_clusters);
  for (std::size_t c = 0; c < config.n_clusters; ++c) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto r = relations.intern("cluster" + std::to_string(c) + " relation" + std::to_string(j));
      truth.relation_cluster[r] = c;
    }
    // Rotating the held-out slot keeps every "relation{j}" token seen in
    // some cluster.
    std::vector<bool> is_held(m, false);
    for (std::size_t i = 0; i < config.holdout_per_cluster; ++i) is_held[(c + i) % m] = true;
    for (std::size_t j = 0; j < m; ++j) {
      const auto r = static_cast<RelationId>(c * m + j);
      (is_held[j] ? held[c] : regular[c]).push_back(r);
      if (is_held[j]) truth.holdout.push_back(r);
    }
  }

  SplitMix64 rng(derive_seed(config.seed, "synth"));
  std::vector<EntityId> objects;
  for (std::size_t k = 0; k < config.n_pairs; ++k) {
    const auto subject = static_cast<EntityId>(k / n_scripts);
    if (k % n_scripts == 0) objects.clear();
    EntityId o;
    do {
      o = static_cast<EntityId>(rng.below(config.n_entities));
    } while (o == subject || std::find(objects.begin(), objects.end(), o) != objects.end());
    objects.push_back(o);
    const std::size_t script = k % n_scripts;
    truth.pairs.push_back({subject, o, script, rng.below(config.scripts[script].size())});
  }

  std::vector<Quadruple> facts;
  std::size_t holdout_eval = 0;
  const std::size_t n_steps = config.train_steps + config.eval_steps;
  for (std::size_t t = 0; t < n_steps; ++t) {
    const bool eval = t >= config.train_steps;
    for (std::size_t k = 0; k < truth.pairs.size(); ++k) {
      if (rng.uniform() >= config.p) continue;
      const std::size_t c = truth.cluster_at(k, t);
      const bool use_held = eval && !held[c].empty() && rng.uniform() < config.holdout_share;
      const auto& pool = use_held ? held[c] : regular[c];
      const RelationId r = pool[rng.below(pool.size())];
      holdout_eval += use_held;
      facts.push_back({truth.pairs[k].subject, r, truth.pairs[k].object, static_cast<Timestamp>(t)});
    }
  }
  if (holdout_eval == 0) throw DataError("synthetic config yields no evaluation facts with held-out relations");

  std::vector<std::string> steps;
  for (std::size_t t = 0; t < n_steps; ++t) steps.push_back(std::to_string(t));
  out.facts.entities = std::move(entities);
  out.facts.relations = RelationVocab(std::move(relations));
  out.facts.timeline = Timeline(std::move(steps));
  out.facts.facts = std::move(facts);
  return out;
}

void write_synth(const std::filesystem::path& dir, const SynthOutput& out) {
  std::filesystem::create_directories(dir);
  const auto& f = out.facts;
  {
    std::ofstream os(dir / "facts.tsv");
    if (!os) throw DataError("cannot write " + (dir / "facts.tsv").string());
    write_quadruples(os, f.facts, f.entities, f.relations, f.timeline);
  }
  write_vocab_tsv(dir / "relations.tsv", f.relations.base().labels());

  const auto& truth = out.truth;
  nlohmann::ordered_json j;
  j["train_steps"] = truth.train_steps;
  j["scripts"] = truth.scripts;
  auto& rc = j["relation_cluster"] = nlohmann::ordered_json::object();
  for (RelationId r = 0; r < truth.relation_cluster.size(); ++r) rc[f.relations.text(r)] = truth.relation_cluster[r];
  auto& hold = j["holdout"] = nlohmann::ordered_json::array();
  for (const auto r : truth.holdout) hold.push_back(f.relations.text(r));
  auto& pairs = j["pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : truth.pairs) {
    pairs.push_back({{"subject", f.entities.label(p.subject)},
                     {"object", f.entities.label(p.object)},
                     {"script", p.script},
                     {"phase", p.phase}});
  }
  std::ofstream(dir / "planted.json") << j.dump(2) << '\n';
}

}  // namespace zrforge
