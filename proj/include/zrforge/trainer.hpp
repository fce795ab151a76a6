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

#include <cstddef>
#include <functional>
#include <vector>

#include "zrforge/forecaster.hpp"
#include "zrforge/kg_data.hpp"

namespace zrforge {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  // Means over the epoch's batches; hist and rhl stay 0 when not computed.
  double loss = 0.0;
  double tkgf = 0.0;
  double hist = 0.0;
  double rhl = 0.0;
  double valid_mrr = 0.0;
  std::size_t batches = 0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_valid_mrr = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains with Adam on G_train: facts are grouped by timestamp and cut into
// shuffled batches; each fact contributes its object query and its
// reciprocal. After every epoch the overall MRR on G_valid is measured; the
// parameters of the best epoch are restored at the end. Throws DataError for
// an empty G_train or G_valid and NumericError for a non-finite loss.
TrainLog fit(Forecaster& model, const TkgDataset& dataset, const EpochCallback& on_epoch = {});

}  // namespace zrforge
