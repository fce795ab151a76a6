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
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "zrforge/forecaster.hpp"
#include "zrforge/kg_data.hpp"
#include "zrforge/numerics/tensor.hpp"
#include "zrforge/snapshot_index.hpp"

namespace zrforge {

// 1 + number of unfiltered candidates other than the target scoring at least
// as high as it (ties count against the target). Throws std::logic_error if
// the target is filtered and NumericError if its score is NaN.
std::size_t rank_of(std::span<const float> scores, std::uint32_t target, std::span<const std::uint32_t> filtered);

struct Metrics {
  std::size_t count = 0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

// All zeros for no ranks.
Metrics summarize(std::span<const std::size_t> ranks);

struct RankReport {
  Metrics zero_shot;
  Metrics seen;
  Metrics overall;  // all queries pooled

  friend bool operator==(const RankReport&, const RankReport&) = default;
};

enum class SplitSelector { kValid, kTest, kBoth };
SplitSelector parse_split_selector(std::string_view name);

struct LpQuery {
  Quadruple query;  // object prediction form
  bool zero_shot = false;
  bool reciprocal = false;
};

// Object queries for the selected splits, each followed by its
// reciprocal-converted subject query. `dataset` carries reciprocals.
std::vector<LpQuery> build_queries(const TkgDataset& dataset, SplitSelector split);

// True objects of every (s, r, t) across all splits, reciprocals included.
class TimeAwareFilter {
 public:
  explicit TimeAwareFilter(const TkgDataset& dataset);
  // Sorted; empty when (s, r, t) has no fact.
  std::span<const EntityId> objects(EntityId s, RelationId r, Timestamp t) const;

 private:
  std::unordered_map<std::uint64_t, std::vector<EntityId>> objects_;
  std::size_t num_relations_ = 0;
  std::size_t num_timestamps_ = 0;
};

// Scores [Q x E] for a block of queries.
using QueryScorer = std::function<nn::Tensor<float>(std::span<const Quadruple>)>;

// Ranks every query under time-aware filtering (other true objects of the
// same (s, r, t) are skipped) and aggregates the buckets. Queries are scored
// in blocks of `block` queries. Throws DataError for no queries.
RankReport rank_queries(std::span<const LpQuery> queries, const QueryScorer& scorer, const TimeAwareFilter& filter,
                        std::size_t block = 1024);

// Evaluates the model on the selected splits. Entity states come from
// `source`; by default an index over G_train.
RankReport evaluate(const Forecaster& model, const TkgDataset& dataset, SplitSelector split);
RankReport evaluate(const Forecaster& model, const TkgDataset& dataset, SplitSelector split,
                    const SnapshotSource& source);

// Forwards to another source and records every timestamp read.
class LoggingSource final : public SnapshotSource {
 public:
  explicit LoggingSource(const SnapshotSource& inner) : inner_(inner) {}
  std::size_t num_timestamps() const override { return inner_.num_timestamps(); }
  const Snapshot& snapshot(Timestamp t) const override {
    accessed_.push_back(t);
    return inner_.snapshot(t);
  }
  const std::vector<Timestamp>& accessed() const { return accessed_; }

 private:
  const SnapshotSource& inner_;
  mutable std::vector<Timestamp> accessed_;
};

std::string report_to_json(const RankReport& report);
RankReport report_from_json(std::string_view text);
void write_report(const std::filesystem::path& path, const RankReport& report);
RankReport read_report(const std::filesystem::path& path);

// Aligned table, one row per metric, columns Zero-Shot, Seen, Overall;
// metrics with 3 decimals.
std::string report_table(const RankReport& report);

}  // namespace zrforge
