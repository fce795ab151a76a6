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


#include "zrforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "zrforge/error.hpp"
#include "zrforge/evaluation.hpp"
#include "zrforge/numerics/optim.hpp"
#include "zrforge/rng.hpp"

namespace zrforge {

namespace {

struct Batch {
  Timestamp t;
  std::vector<Quadruple> facts;
};

std::vector<Batch> make_batches(std::span<const Quadruple> train, std::size_t batch_size, SplitMix64& rng) {
  std::map<Timestamp, std::vector<Quadruple>> by_t;
  for (const auto& q : train) by_t[q.t].push_back(q);
  std::vector<Batch> out;
  for (auto& [t, facts] : by_t) {
    rng.shuffle(facts.begin(), facts.end());
    for (std::size_t i = 0; i < facts.size(); i += batch_size) {
      const auto end = std::min(facts.size(), i + batch_size);
      out.push_back({t, std::vector<Quadruple>(facts.begin() + static_cast<std::ptrdiff_t>(i),
                                               facts.begin() + static_cast<std::ptrdiff_t>(end))});
    }
  }
  rng.shuffle(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> sample_candidates(std::span<const Quadruple> queries, std::size_t n_facts,
                                             std::size_t negatives, std::size_t num_entities, SplitMix64& rng) {
  std::vector<std::uint32_t> c;
  for (const auto& q : queries) c.push_back(q.o);
  for (std::size_t i = 0; i < negatives * n_facts; ++i) c.push_back(static_cast<std::uint32_t>(rng.below(num_entities)));
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

double value_or_zero(const nn::Var<float>& v) { return v.valid() ? static_cast<double>(v.value().item()) : 0.0; }

}  // namespace

TrainLog fit(Forecaster& model, const TkgDataset& dataset, const EpochCallback& on_epoch) {
  if (dataset.train.empty()) throw DataError("split G_train is empty");
  if (dataset.valid.empty()) throw DataError("split G_valid is empty");
  if (dataset.checksum() != model.dataset_checksum()) throw DataError("model was built for a different dataset");
  const auto& config = model.config();
  const auto base = static_cast<RelationId>(dataset.relations.base_count());
  const auto index = SnapshotIndex::build(dataset.train, dataset.num_timestamps(), base);
  const auto valid_queries = build_queries(dataset, SplitSelector::kValid);
  const TimeAwareFilter filter(dataset);

  SplitMix64 rng(derive_seed(config.seed, "train"));
  nn::Adam<float> adam(nn::AdamConfig{config.learning_rate});
  auto& params = model.params();

  TrainLog log;
  std::vector<nn::Tensor<float>> best;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochLog e;
    e.epoch = epoch;
    for (const auto& batch : make_batches(dataset.train, config.batch_size, rng)) {
      const auto queries = with_reciprocal_queries(batch.facts, base);
      std::vector<std::uint32_t> candidates;
      if (config.negatives > 0) {
        candidates = sample_candidates(queries, batch.facts.size(), config.negatives, model.num_entities(), rng);
      }
      nn::Tape<float> tape;
      const auto loss = model.batch_loss(tape, index, queries, batch.t, candidates);
      const double total = loss.total.value().item();
      if (!std::isfinite(total)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", timestamp " << batch.t << ": total " << total
            << ", tkgf " << value_or_zero(loss.tkgf) << ", hist " << value_or_zero(loss.hist) << ", rhl "
            << value_or_zero(loss.rhl);
        throw NumericError(msg.str());
      }
      params.zero_grad();
      tape.backward(loss.total);
      nn::clip_grad_norm(params, config.grad_clip);
      adam.step(params);
      e.loss += total;
      e.tkgf += value_or_zero(loss.tkgf);
      e.hist += value_or_zero(loss.hist);
      e.rhl += value_or_zero(loss.rhl);
      ++e.batches;
    }
    const auto n = static_cast<double>(e.batches);
    e.loss /= n;
    e.tkgf /= n;
    e.hist /= n;
    e.rhl /= n;
    const auto report = rank_queries(
        valid_queries, [&](std::span<const Quadruple> block) { return model.evaluation_scores(index, block); },
        filter);
    e.valid_mrr = report.overall.mrr;
    if (log.epochs.empty() || e.valid_mrr > log.best_valid_mrr) {
      log.best_epoch = epoch;
      log.best_valid_mrr = e.valid_mrr;
      best.clear();
      for (const auto& p : params) best.push_back(p->value);
    }
    log.epochs.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  std::size_t i = 0;
  for (auto& p : params) p->value = best[i++];
  return log;
}

}  // namespace zrforge
