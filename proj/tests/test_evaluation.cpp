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
#include <numeric>

#include "support/rank_oracle.hpp"
#include "support/toy_data.hpp"
#include "zrforge/error.hpp"
#include "zrforge/evaluation.hpp"
#include "zrforge/trainer.hpp"

using namespace zrforge;

TEST_CASE("a strictly best target ranks first") {
  const std::vector<float> s{0.1f, 0.9f, 0.3f};
  CHECK(rank_of(s, 1, {}) == 1);
  CHECK(rank_of(s, 2, {}) == 2);
  CHECK(rank_of(s, 0, {}) == 3);
}

TEST_CASE("ties count against the target") {
  const std::vector<float> s{0.5f, 0.5f, 0.2f, 0.5f};
  CHECK(rank_of(s, 0, {}) == 3);
  CHECK(rank_of(s, 0, {}) == testing::oracle_rank(s, 0, {}));
  CHECK(rank_of(s, 2, {}) == 4);
}

TEST_CASE("filtering a higher true object improves the rank by one") {
  const std::vector<float> s{0.2f, 0.9f, 0.5f, 0.1f};
  const std::vector<std::uint32_t> f{1};
  CHECK(rank_of(s, 2, {}) == 2);
  CHECK(rank_of(s, 2, f) == 1);
  const std::vector<std::uint32_t> self{2};
  CHECK_THROWS_AS(rank_of(s, 2, self), std::logic_error);
  const std::vector<float> nan{std::nanf(""), 0.1f};
  CHECK_THROWS_AS(rank_of(nan, 0, {}), NumericError);
}

TEST_CASE("rank matches a full-sort oracle on random small instances") {
  SplitMix64 rng(2024);
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = testing::random_rank_instance(rng);
    mismatches += rank_of(inst.scores, inst.target, inst.filtered) !=
                  testing::oracle_rank(inst.scores, inst.target, inst.filtered);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("filtering never worsens a rank") {
  SplitMix64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto inst = testing::random_rank_instance(rng);
    CHECK(rank_of(inst.scores, inst.target, inst.filtered) <= rank_of(inst.scores, inst.target, {}));
  }
}

TEST_CASE("metric aggregation") {
  const std::vector<std::size_t> ranks{1, 2};
  const auto m = summarize(ranks);
  CHECK(m.count == 2);
  CHECK(m.mrr == doctest::Approx(0.75));
  CHECK(m.hits1 == doctest::Approx(0.5));
  CHECK(m.hits3 == doctest::Approx(1.0));
  CHECK(m.hits10 == doctest::Approx(1.0));
  CHECK(summarize({}) == Metrics{});
  SplitMix64 rng(3);
  std::vector<std::size_t> many;
  for (int i = 0; i < 200; ++i) many.push_back(1 + rng.below(30));
  const auto s = summarize(many);
  CHECK(s.hits1 <= s.hits3);
  CHECK(s.hits3 <= s.hits10);
  CHECK(s.hits10 <= 1.0);
  CHECK(s.mrr > 0.0);
  CHECK(s.mrr <= 1.0);
}

TEST_CASE("random scores give the harmonic-number MRR") {
  const auto r = testing::random_baseline(100, 10000, 11);
  CHECK(r.overall.count == 10000);
  CHECK(std::abs(r.overall.mrr - testing::harmonic(100) / 100.0) <= 0.005);
}

TEST_CASE("queries cover both directions and bucket by relation status") {
  const auto d = testing::random_toy(1);
  const auto both = build_queries(d, SplitSelector::kBoth);
  CHECK(both.size() == 2 * (d.valid.size() + d.test.size()));
  for (std::size_t i = 0; i < both.size(); i += 2) {
    CHECK_FALSE(both[i].reciprocal);
    CHECK(both[i + 1].reciprocal);
    CHECK(both[i + 1].query == reciprocal(both[i].query, d.relations));
  }
  for (const auto& q : build_queries(d, SplitSelector::kTest)) {
    CHECK(q.zero_shot);
    CHECK(d.relations.is_unseen(q.query.r));
  }
  for (const auto& q : build_queries(d, SplitSelector::kValid)) CHECK_FALSE(q.zero_shot);
  CHECK(parse_split_selector("both") == SplitSelector::kBoth);
  CHECK_THROWS_AS(parse_split_selector("train"), std::invalid_argument);
}

TEST_CASE("time-aware filter collects true objects over all splits") {
  const auto d = testing::toy_dataset(4, 2, 4, {{0, 0, 1, 0}, {0, 0, 2, 0}, {1, 1, 3, 1}}, {{0, 0, 3, 2}, {0, 0, 2, 2}},
                                      {}, 2);
  const TimeAwareFilter f(d);
  CHECK(std::vector<EntityId>(f.objects(0, 0, 0).begin(), f.objects(0, 0, 0).end()) == std::vector<EntityId>{1, 2});
  CHECK(std::vector<EntityId>(f.objects(0, 0, 2).begin(), f.objects(0, 0, 2).end()) == std::vector<EntityId>{2, 3});
  // reciprocal of (1, r1, 3, 1)
  CHECK(std::vector<EntityId>(f.objects(3, 3, 1).begin(), f.objects(3, 3, 1).end()) == std::vector<EntityId>{1});
  CHECK(f.objects(0, 0, 1).empty());
}

TEST_CASE("evaluation reads no snapshot at or after the first evaluation timestamp") {
  const auto d = testing::random_toy(2);
  TrainConfig cfg;
  cfg.dim = 6;
  cfg.window = 3;
  cfg.epochs = 1;
  Forecaster model(d, testing::toy_texts(d), cfg);
  std::vector<Quadruple> all = d.train;
  all.insert(all.end(), d.valid.begin(), d.valid.end());
  all.insert(all.end(), d.test.begin(), d.test.end());
  const auto full = SnapshotIndex::build(all, d.num_timestamps(), static_cast<RelationId>(d.relations.base_count()));
  const LoggingSource logged(full);
  const auto report = evaluate(model, d, SplitSelector::kBoth, logged);
  REQUIRE_FALSE(logged.accessed().empty());
  for (const auto t : logged.accessed()) CHECK(t < d.first_eval);
  CHECK(report.overall.count == 2 * (d.valid.size() + d.test.size()));
  CHECK(report == evaluate(model, d, SplitSelector::kBoth));
}

TEST_CASE("empty evaluation split is an error") {
  auto d = testing::random_toy(3);
  d.test.clear();
  Forecaster model(d, testing::toy_texts(d), TrainConfig{});
  CHECK_THROWS_AS(evaluate(model, d, SplitSelector::kTest), DataError);
}

TEST_CASE("report JSON round trip and table layout") {
  RankReport r;
  r.zero_shot = {270, 0.123456789, 0.1, 0.2, 0.3};
  r.seen = {2774, 0.987654321, 0.9, 0.95, 0.99};
  r.overall = {3044, 1.0 / 3.0, 0.25, 0.5, 0.75};
  CHECK(report_from_json(report_to_json(r)) == r);
  const auto path = std::filesystem::temp_directory_path() / "zrforge_report.json";
  write_report(path, r);
  CHECK(read_report(path) == r);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(report_from_json("{\"seen\": {}}"), FormatError);

  const auto table = report_table(r);
  const auto header = table.substr(0, table.find('\n'));
  const auto z = header.find("Zero-Shot"), s = header.find("Seen"), o = header.find("Overall");
  REQUIRE(z != std::string::npos);
  CHECK(z < s);
  CHECK(s < o);
  CHECK(table.find("0.123") != std::string::npos);
  CHECK(table.find("0.988") != std::string::npos);
  CHECK(table.find("0.333") != std::string::npos);
  CHECK(table.find("0.1234") == std::string::npos);
}
