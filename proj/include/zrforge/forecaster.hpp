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
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zrforge/kg_data.hpp"
#include "zrforge/numerics/tape.hpp"
#include "zrforge/rel_semantics.hpp"
#include "zrforge/rhl.hpp"
#include "zrforge/snapshot_index.hpp"

namespace zrforge {

enum class GammaMode { kFixed, kLearnable };

// Config file keys are the field names below, one `key=value` per line.
struct TrainConfig {
  std::size_t dim = 32;
  // Snapshots the base model evolves over before a query timestamp.
  std::size_t window = 3;
  std::size_t max_history_len = 32;
  double alpha = 0.1;
  GammaMode gamma_mode = GammaMode::kFixed;
  double gamma = 1.0;
  double eta = 1.0;
  double learning_rate = 1e-3;
  double grad_clip = 1.0;
  std::size_t epochs = 20;
  // Training facts per batch; every fact also yields its reciprocal query.
  std::size_t batch_size = 128;
  // 0 scores every entity; otherwise each batch scores its true objects plus
  // negatives * batch facts shared random entities.
  std::size_t negatives = 0;
  std::uint64_t seed = 0;
  bool no_rhl = false;
  bool random_frozen_rel_emb = false;

  // Throws std::invalid_argument.
  void validate() const;
};

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& config);
// Throws std::invalid_argument for an unknown key or a malformed value.
void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
void write_config(std::ostream& out, const TrainConfig& config);
// Blank lines and lines starting with '#' are ignored.
TrainConfig parse_config(std::istream& in);
TrainConfig read_config(const std::filesystem::path& path);

// base + gamma * rhl.
nn::Var<float> total_score(const nn::Var<float>& base, const nn::Var<float>& rhl, float gamma);
// tkgf + hist + eta * rhl; invalid hist or rhl terms are left out, as is rhl
// when eta = 0.
nn::Var<float> total_loss(const nn::Var<float>& tkgf, const nn::Var<float>& hist, const nn::Var<float>& rhl,
                          float eta);

struct BatchLoss {
  nn::Var<float> tkgf;
  nn::Var<float> hist;  // invalid when t = 0 or the history learner is unused
  nn::Var<float> rhl;   // invalid when the history learner is unused or eta = 0
  nn::Var<float> total;
};

// Evolving-entity base model with aligned text relation representations
// and, unless disabled, the relation history learner on top.
class Forecaster {
 public:
  // `dataset` must carry reciprocal relations; `texts` must cover all of
  // them (it is replaced by a seeded random store under
  // random_frozen_rel_emb).
  Forecaster(const TkgDataset& dataset, const TextStore& texts, const TrainConfig& config);

  const TrainConfig& config() const { return config_; }
  const TextStore& texts() const { return texts_; }
  std::uint64_t dataset_checksum() const { return dataset_checksum_; }
  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }
  std::size_t base_relations() const { return num_relations_ / 2; }
  Timestamp first_eval() const { return first_eval_; }
  bool has_rhl() const { return rhl_ != nullptr; }
  const RelationHistoryLearner<float>* rhl() const { return rhl_.get(); }
  nn::ParameterSet<float>& params() { return params_; }
  const nn::ParameterSet<float>& params() const { return params_; }
  // Scalar count of the history learner's parameters (0 when disabled).
  std::size_t rhl_parameter_count() const;
  // Whether the history learner can affect the objective: false without it
  // and for a fixed gamma of 0 with eta = 0, which then trains exactly like
  // the disabled model.
  bool rhl_in_use() const;
  // Current gamma (0 without the history learner).
  double gamma() const;

  // Aligned representation of every relation, [R x d].
  nn::Var<float> relation_embeddings(nn::Tape<float>& tape) const;
  // Entity states after evolving the static table over snapshots [from, to).
  nn::Var<float> evolve(nn::Tape<float>& tape, const SnapshotSource& source, const nn::Var<float>& relations,
                        Timestamp from, Timestamp to) const;

  // Rows follow the queries. Without the history learner in use, rhl and
  // predicted are invalid and total is base.
  struct Scores {
    nn::Var<float> base;
    nn::Var<float> rhl;
    nn::Var<float> predicted;  // predicted history of each query relation
    nn::Var<float> total;
  };
  // Scores of (s, r, candidate) for each query against candidate rows.
  Scores score(const nn::Var<float>& entities, const nn::Var<float>& relations, std::span<const Quadruple> queries,
               const nn::Var<float>& candidates) const;

  // Training losses for queries that all share timestamp t. `candidates`
  // lists the scored entities (empty: all). Facts at t in `train` supply the
  // RHL labels and pair histories come from `train` as well.
  BatchLoss batch_loss(nn::Tape<float>& tape, const SnapshotIndex& train, std::span<const Quadruple> queries,
                       Timestamp t, std::span<const std::uint32_t> candidates = {}) const;

  // Encoded relation history of each query's (s, o) pair before t, [Q x d].
  nn::Var<float> encode_histories(nn::Tape<float>& tape, const SnapshotIndex& train, const nn::Var<float>& relations,
                                  std::span<const Quadruple> queries, Timestamp t) const;

  // Total scores [Q x E] for queries after training; entity states use only
  // the last `window` snapshots before first_eval, read from `source`.
  nn::Tensor<float> evaluation_scores(const SnapshotSource& source, std::span<const Quadruple> queries) const;

 private:
  TrainConfig config_;
  TextStore texts_;
  std::uint64_t dataset_checksum_;
  std::size_t num_entities_;
  std::size_t num_relations_;
  Timestamp first_eval_;
  nn::ParameterSet<float> params_;
  std::unique_ptr<AlignmentNet<float>> align_;
  nn::Parameter<float>* entity_ = nullptr;
  nn::Parameter<float>* msg_ = nullptr;
  std::unique_ptr<nn::Gru<float>> entity_gru_;
  std::unique_ptr<RelationHistoryLearner<float>> rhl_;
  nn::Parameter<float>* gamma_ = nullptr;
};

// (o, r^-1, s, t) for every fact, after the facts themselves.
std::vector<Quadruple> with_reciprocal_queries(std::span<const Quadruple> facts, std::size_t base_relations);

// Checkpoint: "ZRCK", u32 version, u64 dataset checksum, config text, the
// ZRLE text store, then named float tensors.
struct Checkpoint {
  TrainConfig config;
  std::uint64_t dataset_checksum = 0;
  TextStore texts;
  std::map<std::string, nn::Tensor<float>> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Forecaster& model);
Checkpoint read_checkpoint(const std::filesystem::path& path);
// Rebuilds the model for `dataset` (with reciprocals) and loads the weights.
// Throws DataError on a checksum or parameter mismatch.
std::unique_ptr<Forecaster> restore(const TkgDataset& dataset, const Checkpoint& checkpoint);

}  // namespace zrforge
