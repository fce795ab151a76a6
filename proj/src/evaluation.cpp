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


#include "zrforge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "zrforge/error.hpp"

namespace zrforge {

std::size_t rank_of(std::span<const float> scores, std::uint32_t target, std::span<const std::uint32_t> filtered) {
  if (target >= scores.size()) throw std::out_of_range("target outside the candidate set");
  if (std::find(filtered.begin(), filtered.end(), target) != filtered.end()) {
    throw std::logic_error("target object " + std::to_string(target) + " is in its own filter set");
  }
  const float ref = scores[target];
  if (std::isnan(ref)) throw NumericError("NaN score for the target object");
  std::size_t rank = 1;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (e != target && scores[e] >= ref) ++rank;
  }
  for (const auto e : filtered) {
    if (e < scores.size() && scores[e] >= ref) --rank;
  }
  return rank;
}

Metrics summarize(std::span<const std::size_t> ranks) {
  Metrics m;
  m.count = ranks.size();
  if (ranks.empty()) return m;
  for (const auto r : ranks) {
    m.mrr += 1.0 / static_cast<double>(r);
    m.hits1 += r <= 1;
    m.hits3 += r <= 3;
    m.hits10 += r <= 10;
  }
  const auto n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
  return m;
}

SplitSelector parse_split_selector(std::string_view name) {
  if (name == "valid") return SplitSelector::kValid;
  if (name == "test") return SplitSelector::kTest;
  if (name == "both") return SplitSelector::kBoth;
  throw std::invalid_argument("split must be valid, test or both, got '" + std::string(name) + "'");
}

std::vector<LpQuery> build_queries(const TkgDataset& dataset, SplitSelector split) {
  if (!dataset.relations.has_reciprocals()) throw std::logic_error("queries need reciprocal relations");
  std::vector<const std::vector<Quadruple>*> parts;
  if (split != SplitSelector::kTest) parts.push_back(&dataset.valid);
  if (split != SplitSelector::kValid) parts.push_back(&dataset.test);
  std::vector<LpQuery> out;
  for (const auto* part : parts) {
    for (const auto& q : *part) {
      const bool zero_shot = dataset.relations.is_unseen(q.r);
      out.push_back({q, zero_shot, false});
      out.push_back({reciprocal(q, dataset.relations), zero_shot, true});
    }
  }
  return out;
}

TimeAwareFilter::TimeAwareFilter(const TkgDataset& dataset)
    : num_relations_(dataset.num_relations()), num_timestamps_(dataset.num_timestamps()) {
  if (!dataset.relations.has_reciprocals()) throw std::logic_error("filter needs reciprocal relations");
  auto key = [this](EntityId s, RelationId r, Timestamp t) {
    return (std::uint64_t{s} * num_relations_ + r) * num_timestamps_ + t;
  };
  for (const auto* split : {&dataset.train, &dataset.valid, &dataset.test}) {
    for (const auto& q : *split) {
      objects_[key(q.s, q.r, q.t)].push_back(q.o);
      const auto inv = reciprocal(q, dataset.relations);
      objects_[key(inv.s, inv.r, inv.t)].push_back(inv.o);
    }
  }
  for (auto& [k, v] : objects_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

std::span<const EntityId> TimeAwareFilter::objects(EntityId s, RelationId r, Timestamp t) const {
  const auto it = objects_.find((std::uint64_t{s} * num_relations_ + r) * num_timestamps_ + t);
  if (it == objects_.end()) return {};
  return it->second;
}

RankReport rank_queries(std::span<const LpQuery> queries, const QueryScorer& scorer, const TimeAwareFilter& filter,
                        std::size_t block) {
  if (queries.empty()) throw DataError("no evaluation queries");
  if (block == 0) throw std::invalid_argument("block size must be positive");
  std::vector<std::size_t> zero_shot, seen, all;
  std::vector<Quadruple> quads;
  std::vector<std::uint32_t> others;
  for (std::size_t begin = 0; begin < queries.size(); begin += block) {
    const std::size_t end = std::min(queries.size(), begin + block);
    quads.clear();
    for (std::size_t i = begin; i < end; ++i) quads.push_back(queries[i].query);
    const auto scores = scorer(quads);
    if (scores.rank() != 2 || scores.dim(0) != quads.size()) {
      throw ShapeError("scorer returned " + nn::shape_string(scores.shape()) + " for " +
                       std::to_string(quads.size()) + " queries");
    }
    const std::size_t n = scores.dim(1);
    for (std::size_t i = begin; i < end; ++i) {
      const auto& q = queries[i].query;
      others.clear();
      for (const auto e : filter.objects(q.s, q.r, q.t)) {
        if (e != q.o) others.push_back(e);
      }
      const auto rank = rank_of(std::span<const float>(scores.data() + (i - begin) * n, n), q.o, others);
      (queries[i].zero_shot ? zero_shot : seen).push_back(rank);
      all.push_back(rank);
    }
  }
  return {summarize(zero_shot), summarize(seen), summarize(all)};
}

RankReport evaluate(const Forecaster& model, const TkgDataset& dataset, SplitSelector split) {
  const auto index = SnapshotIndex::build(dataset.train, dataset.num_timestamps(),
                                          static_cast<RelationId>(dataset.relations.base_count()));
  return evaluate(model, dataset, split, index);
}

RankReport evaluate(const Forecaster& model, const TkgDataset& dataset, SplitSelector split,
                    const SnapshotSource& source) {
  const auto queries = build_queries(dataset, split);
  const TimeAwareFilter filter(dataset);
  return rank_queries(
      queries, [&](std::span<const Quadruple> block) { return model.evaluation_scores(source, block); }, filter);
}

namespace {

nlohmann::ordered_json metrics_json(const Metrics& m) {
  return {{"count", m.count}, {"mrr", m.mrr}, {"hits1", m.hits1}, {"hits3", m.hits3}, {"hits10", m.hits10}};
}

Metrics metrics_from(const nlohmann::ordered_json& j) {
  Metrics m;
  m.count = j.at("count").get<std::size_t>();
  m.mrr = j.at("mrr").get<double>();
  m.hits1 = j.at("hits1").get<double>();
  m.hits3 = j.at("hits3").get<double>();
  m.hits10 = j.at("hits10").get<double>();
  return m;
}

}  // namespace

std::string report_to_json(const RankReport& report) {
  nlohmann::ordered_json j;
  j["zero_shot"] = metrics_json(report.zero_shot);
  j["seen"] = metrics_json(report.seen);
  j["overall"] = metrics_json(report.overall);
  return j.dump(2);
}

RankReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    return {metrics_from(j.at("zero_shot")), metrics_from(j.at("seen")), metrics_from(j.at("overall"))};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report JSON: ") + e.what());
  }
}

void write_report(const std::filesystem::path& path, const RankReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << report_to_json(report) << '\n';
}

RankReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return report_from_json(text.str());
}

std::string report_table(const RankReport& report) {
  const Metrics* cols[] = {&report.zero_shot, &report.seen, &report.overall};
  auto line = [](const char* name, const std::string& a, const std::string& b, const std::string& c) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-8s %10s %10s %10s\n", name, a.c_str(), b.c_str(), c.c_str());
    return std::string(buf);
  };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return std::string(buf);
  };
  std::string out = line("", "Zero-Shot", "Seen", "Overall");
  const std::pair<const char*, double Metrics::*> rows[] = {
      {"MRR", &Metrics::mrr}, {"Hits@1", &Metrics::hits1}, {"Hits@3", &Metrics::hits3}, {"Hits@10", &Metrics::hits10}};
  for (const auto& [name, field] : rows) out += line(name, fmt(cols[0]->*field), fmt(cols[1]->*field), fmt(cols[2]->*field));
  out += line("Queries", std::to_string(cols[0]->count), std::to_string(cols[1]->count), std::to_string(cols[2]->count));
  return out;
}

}  // namespace zrforge
