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

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "zrforge/error.hpp"
#include "zrforge/numerics/batched.hpp"
#include "zrforge/numerics/layers.hpp"
#include "zrforge/numerics/ops.hpp"
#include "zrforge/rng.hpp"

namespace zrforge {

// Relation history learner: per-timestep attention over co-occurring
// relations, a GRU over the pair's history, a history prediction network
// (HPN) that guesses that encoding from the query relation alone, and a
// TuckER core scoring (subject, pattern, object).
template <typename T>
class RelationHistoryLearner {
 public:
  RelationHistoryLearner(nn::ParameterSet<T>& params, std::size_t dim, T alpha, SplitMix64& rng)
      : dim_(dim),
        alpha_(alpha),
        agg_(params, "rhl.agg", nn::MlpSpec{{dim, dim, dim}}, rng),
        gru_(params, "rhl.gru", dim, dim, rng),
        hist_(params, "rhl.hist", nn::MlpSpec{{dim, dim, dim}}, rng),
        dummy_(&params.add("rhl.dummy", nn::uniform_tensor<T>({dim}, 1.0 / std::sqrt(double(dim)), rng))),
        core_(&params.add("rhl.core", nn::uniform_tensor<T>({dim, dim, dim}, 0.1, rng))) {}

  std::size_t dim() const { return dim_; }
  T alpha() const { return alpha_; }
  nn::Mlp<T>& agg() { return agg_; }
  nn::Gru<T>& gru() { return gru_; }
  nn::Mlp<T>& hist() { return hist_; }
  nn::Parameter<T>& dummy() { return *dummy_; }
  nn::Parameter<T>& core() { return *core_; }

  // sum_m softmax_m(h_m . MLP_agg(query)) h_m; the dummy embedding for an
  // empty step.
  nn::Var<T> aggregate(nn::Tape<T>& tape, std::span<const nn::Var<T>> members, const nn::Var<T>& query) const {
    if (members.empty()) return tape.param(*dummy_);
    if (members.size() == 1) return members[0];
    return attend(nn::stack<T>(members), agg_(query));
  }

  // Attention of `key` (MLP_agg of the query) over member rows [k x d].
  static nn::Var<T> attend(const nn::Var<T>& members, const nn::Var<T>& key) {
    return nn::vecmat(nn::softmax(nn::matvec(members, key)), members);
  }

  // MLP_agg of every relation row.
  nn::Var<T> keys(const nn::Var<T>& relations) const { return agg_.rows(relations); }

  // GRU over the aggregated steps, started from the first one. `steps[i]`
  // holds the embeddings of the relations at the i-th history step.
  nn::Var<T> encode_history(nn::Tape<T>& tape, std::span<const std::vector<nn::Var<T>>> steps,
                            const nn::Var<T>& query) const {
    if (steps.empty()) throw std::invalid_argument("cannot encode an empty history");
    nn::Var<T> h = aggregate(tape, steps[0], query);
    for (std::size_t i = 1; i < steps.size(); ++i) h = gru_(aggregate(tape, steps[i], query), h);
    return h;
  }

  // alpha * MLP_hist(query) + query.
  nn::Var<T> predict_history(const nn::Var<T>& query) const {
    return nn::add(nn::scale(hist_(query), alpha_), query);
  }

  nn::Var<T> predict_rows(const nn::Var<T>& relations) const {
    return nn::add(nn::scale(hist_.rows(relations), alpha_), relations);
  }

  // Equal-length histories of a batch: steps[i][q] is query q's aggregated
  // input at step i.
  nn::Var<T> encode_histories(std::span<const std::vector<nn::RowRef<T>>> steps) const {
    if (steps.empty()) throw std::invalid_argument("cannot encode an empty history");
    nn::Var<T> h = nn::assemble_rows<T>(steps[0]);
    for (std::size_t i = 1; i < steps.size(); ++i) h = gru_.rows(nn::assemble_rows<T>(steps[i]), h);
    return h;
  }

  static nn::Var<T> history_loss(const nn::Var<T>& predicted, const nn::Var<T>& encoded) {
    return nn::mse(predicted, encoded);
  }

  // One more GRU step: input the query relation, state the predicted history.
  nn::Var<T> pattern(const nn::Var<T>& query, const nn::Var<T>& predicted) const { return gru_(query, predicted); }

  nn::Var<T> pattern_rows(const nn::Var<T>& relations, const nn::Var<T>& predicted) const {
    return gru_.rows(relations, predicted);
  }

  // W x1 h_s x2 h_pat x3 h_o, unsquashed.
  nn::Var<T> score(const nn::Var<T>& subject, const nn::Var<T>& pat, const nn::Var<T>& object) const {
    return nn::tucker3(subject.tape().param(*core_), subject, pat, object);
  }

  // Scores against every row of `entities` [n x d] at once.
  nn::Var<T> score_all(const nn::Var<T>& subject, const nn::Var<T>& pat, const nn::Var<T>& entities) const {
    return nn::matvec(entities, nn::tucker_contract(subject.tape().param(*core_), subject, pat));
  }

  // Row q of the result scores subjects[q], patterns[q] against every
  // candidate row.
  nn::Var<T> score_rows(const nn::Var<T>& subjects, const nn::Var<T>& patterns, const nn::Var<T>& candidates) const {
    return nn::matmul_nt(nn::tucker_contract_rows(subjects.tape().param(*core_), subjects, patterns), candidates);
  }

 private:
  std::size_t dim_;
  T alpha_;
  nn::Mlp<T> agg_;
  nn::Gru<T> gru_;
  nn::Mlp<T> hist_;
  nn::Parameter<T>* dummy_;
  nn::Parameter<T>* core_;
};

}  // namespace zrforge
