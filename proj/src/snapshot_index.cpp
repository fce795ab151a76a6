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


#include "zrforge/snapshot_index.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

#include "zrforge/error.hpp"

namespace zrforge {

SnapshotIndex SnapshotIndex::build(std::span<const Quadruple> facts, std::size_t num_timestamps,
                                   std::optional<RelationId> reciprocal_offset) {
  SnapshotIndex index;
  index.snapshots_.resize(num_timestamps);
  struct Edge {
    EntityId dst, src;
    RelationId rel;
  };
  std::vector<std::vector<Edge>> edges(num_timestamps);
  for (const auto& q : facts) {
    if (q.t >= num_timestamps) {
      throw DataError("fact at timestamp " + std::to_string(q.t) + " outside a timeline of " +
                      std::to_string(num_timestamps));
    }
    index.snapshots_[q.t].facts.push_back(q);
    edges[q.t].push_back({q.o, q.s, q.r});
    index.pairs_[pair_key(q.s, q.o)].emplace_back(q.t, q.r);
    if (reciprocal_offset) {
      const RelationId inv = q.r + *reciprocal_offset;
      edges[q.t].push_back({q.s, q.o, inv});
      index.pairs_[pair_key(q.o, q.s)].emplace_back(q.t, inv);
    }
  }
  for (std::size_t t = 0; t < num_timestamps; ++t) {
    auto& e = edges[t];
    std::sort(e.begin(), e.end(), [](const Edge& a, const Edge& b) {
      return std::tie(a.dst, a.src, a.rel) < std::tie(b.dst, b.src, b.rel);
    });
    Snapshot& snap = index.snapshots_[t];
    snap.offsets.push_back(0);
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (i == 0 || e[i].dst != e[i - 1].dst) {
        if (i != 0) snap.offsets.push_back(static_cast<std::uint32_t>(i));
        snap.targets.push_back(e[i].dst);
      }
      snap.edges.push_back({e[i].src, e[i].rel});
    }
    if (!e.empty()) snap.offsets.push_back(static_cast<std::uint32_t>(e.size()));
  }
  for (auto& [key, list] : index.pairs_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return index;
}

std::size_t SnapshotIndex::total_facts() const {
  std::size_t n = 0;
  for (const auto& s : snapshots_) n += s.facts.size();
  return n;
}

PairHistory SnapshotIndex::pair_history(EntityId s, EntityId o, Timestamp t, std::size_t max_len) const {
  if (max_len == 0) throw std::invalid_argument("pair_history: max_len must be >= 1");
  if (t > snapshots_.size()) throw std::out_of_range("pair_history: t beyond the timeline");
  PairHistory h;
  h.start = t > max_len ? static_cast<Timestamp>(t - max_len) : 0;
  h.steps.resize(t - h.start);
  const auto it = pairs_.find(pair_key(s, o));
  if (it == pairs_.end()) return h;
  const auto& list = it->second;
  auto pos = std::lower_bound(list.begin(), list.end(), std::make_pair(h.start, RelationId{0}));
  for (; pos != list.end() && pos->first < t; ++pos) h.steps[pos->first - h.start].push_back(pos->second);
  return h;
}

}  // namespace zrforge
