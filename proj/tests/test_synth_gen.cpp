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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "zrforge/error.hpp"
#include "zrforge/synth_gen.hpp"
#include "zrforge/zeroshot_split.hpp"

using namespace zrforge;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("zrforge_synth_" + name);
  fs::remove_all(dir);
  return dir;
}

SynthConfig tiny_config() {
  SynthConfig c;
  c.n_entities = 2;
  c.n_clusters = 2;
  c.relations_per_cluster = 2;
  c.scripts = {{0, 1}};
  c.n_pairs = 1;
  c.train_steps = 2;
  c.eval_steps = 2;
  c.p = 1.0;
  c.holdout_share = 1.0;
  return c;
}

}  // namespace

TEST_CASE("same seed gives byte-identical files") {
  SynthConfig c;
  c.seed = 11;
  const auto a = scratch("a"), b = scratch("b");
  write_synth(a, generate(c));
  write_synth(b, generate(c));
  for (const char* f : {"facts.tsv", "relations.tsv", "planted.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(slurp(a / f).empty());
  }
  c.seed = 12;
  const auto d = scratch("d");
  write_synth(d, generate(c));
  CHECK(slurp(a / "facts.tsv") != slurp(d / "facts.tsv"));
}

TEST_CASE("p=1, one pair, period-2 script, 4 steps") {
  const auto out = generate(tiny_config());
  const auto& facts = out.facts.facts;
  REQUIRE(facts.size() == 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(facts[t].t == t);
    CHECK(facts[t].s == 0);
    CHECK(facts[t].o == 1);
  }
  const auto& cl = out.truth.relation_cluster;
  CHECK(cl[facts[0].r] != cl[facts[1].r]);
  CHECK(cl[facts[0].r] == cl[facts[2].r]);
  CHECK(cl[facts[1].r] == cl[facts[3].r]);
  // Held-out slots: cluster 0 -> relation0 (id 0), cluster 1 -> relation1 (id 3).
  CHECK(out.truth.holdout == std::vector<RelationId>{0, 3});
  for (std::size_t t = 0; t < 2; ++t) CHECK((facts[t].r == 1 || facts[t].r == 2));
  for (std::size_t t = 2; t < 4; ++t) CHECK((facts[t].r == 0 || facts[t].r == 3));
  CHECK(out.facts.relations.text(3) == "cluster1 relation1");
}

TEST_CASE("held-out relations never appear before the boundary") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthConfig c;
    c.seed = seed;
    const auto out = generate(c);
    const std::set<RelationId> held(out.truth.holdout.begin(), out.truth.holdout.end());
    std::size_t held_eval = 0;
    for (const auto& q : out.facts.facts) {
      if (!held.count(q.r)) continue;
      CHECK(q.t >= c.train_steps);
      ++held_eval;
    }
    CHECK(held_eval > 0);
  }
}

TEST_CASE("facts follow the planted scripts and cluster labels") {
  SynthConfig c;
  c.seed = 3;
  const auto out = generate(c);
  const auto& truth = out.truth;
  for (RelationId r = 0; r < truth.relation_cluster.size(); ++r) {
    const auto& text = out.facts.relations.text(r);
    CHECK(text.rfind("cluster" + std::to_string(truth.relation_cluster[r]) + " ", 0) == 0);
  }
  std::map<std::pair<EntityId, EntityId>, std::size_t> pair_index;
  for (std::size_t k = 0; k < truth.pairs.size(); ++k) {
    pair_index[{truth.pairs[k].subject, truth.pairs[k].object}] = k;
  }
  CHECK(pair_index.size() == truth.pairs.size());
  for (const auto& q : out.facts.facts) {
    const auto it = pair_index.find({q.s, q.o});
    REQUIRE(it != pair_index.end());
    CHECK(truth.relation_cluster[q.r] == truth.cluster_at(it->second, q.t));
  }
  // One object per (subject, script).
  std::set<std::pair<EntityId, std::size_t>> keys;
  for (const auto& p : truth.pairs) CHECK(keys.insert({p.subject, p.script}).second);
}

TEST_CASE("split recovers the planted holdout set") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SynthConfig c;
    c.seed = seed;
    const auto out = generate(c);
    SplitConfig sc;
    sc.split_timestamp = static_cast<Timestamp>(c.train_steps);
    sc.freq_threshold = 40;
    const auto r = build_zero_shot_dataset(out.facts, sc);
    std::set<std::string> planted, found;
    for (const auto h : out.truth.holdout) planted.insert(out.facts.relations.text(h));
    for (const auto u : r.dataset.relations.unseen_base()) found.insert(r.dataset.relations.text(u));
    CHECK(found == planted);
    CHECK(r.partition.reclassified.empty());
  }
}

TEST_CASE("config errors") {
  auto c = tiny_config();
  c.holdout_share = 0.0;
  CHECK_THROWS_AS(generate(c), DataError);
  c = tiny_config();
  c.eval_steps = 0;
  CHECK_THROWS_AS(generate(c), DataError);
  c = tiny_config();
  c.holdout_per_cluster = 2;
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
  c = tiny_config();
  c.p = 0.0;
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
  c = tiny_config();
  c.scripts = {{0, 5}};
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
}
