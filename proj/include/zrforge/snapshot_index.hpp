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
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zrforge/kg_data.hpp"

namespace zrforge {

struct InEdge {
  EntityId src;
  RelationId rel;
};

// Facts of one timestamp plus their incoming-edge adjacency grouped by
// target entity.
struct Snapshot {
  std::vector<Quadruple> facts;
  std::vector<EntityId> targets;       // ascending
  std::vector<std::uint32_t> offsets;  // targets.size() + 1 entries into edges
  std::vector<InEdge> edges;

  std::span<const InEdge> incoming(std::size_t target_index) const {
    return std::span<const InEdge>(edges).subspan(offsets[target_index],
                                                  offsets[target_index + 1] - offsets[target_index]);
  }
};

// Read access to per-timestamp snapshots; the base model consumes graph
// history only through this interface.
class SnapshotSource {
 public:
  virtual ~SnapshotSource() = default;
  virtual std::size_t num_timestamps() const = 0;
  virtual const Snapshot& snapshot(Timestamp t) const = 0;
};

// Relation sets between an ordered entity pair for consecutive timestamps
// [start, start + steps.size()).
struct PairHistory {
  Timestamp start = 0;
  std::vector<std::vector<RelationId>> steps;

  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  friend bool operator==(const PairHistory&, const PairHistory&) = default;
};

class SnapshotIndex final : public SnapshotSource {
 public:
  SnapshotIndex() = default;

  // Groups facts by timestamp. When `reciprocal_offset` is set, a fact
  // (s, r, o, t) also gives s an incoming edge from o labelled
  // r + reciprocal_offset, and the pair history of (o, s) sees that relation.
  static SnapshotIndex build(std::span<const Quadruple> facts, std::size_t num_timestamps,
                             std::optional<RelationId> reciprocal_offset = std::nullopt);

  std::size_t num_timestamps() const override { return snapshots_.size(); }
  const Snapshot& snapshot(Timestamp t) const override { return snapshots_.at(t); }
  std::size_t total_facts() const;

  // Relation sets linking s to o at each timestamp before t, restricted to
  // the most recent max_len timestamps.
  PairHistory pair_history(EntityId s, EntityId o, Timestamp t, std::size_t max_len) const;

 private:
  static std::uint64_t pair_key(EntityId s, EntityId o) { return std::uint64_t{s} << 32 | o; }

  std::vector<Snapshot> snapshots_;
  // (s, o) -> (t, r) sorted ascending
  std::unordered_map<std::uint64_t, std::vector<std::pair<Timestamp, RelationId>>> pairs_;
};

}  // namespace zrforge
