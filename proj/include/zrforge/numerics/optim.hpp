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
#include <unordered_map>
#include <vector>

#include "zrforge/numerics/tape.hpp"

namespace zrforge::nn {

// Scales all gradients so their global L2 norm is at most max_norm. Returns
// the norm before clipping.
template <typename T>
double clip_grad_norm(ParameterSet<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (const T g : p->grad.storage()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& p : params) {
      for (T& g : p->grad.storage()) g *= s;
    }
  }
  return norm;
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParameterSet<T>& params) {
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (auto& p : params) {
      auto& [m, v] = moments_[p.get()];
      if (m.size() != p->value.size()) {
        m.assign(p->value.size(), 0.0);
        v.assign(p->value.size(), 0.0);
      }
      T* w = p->value.data();
      const T* g = p->grad.data();
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double gi = g[i];
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
        const double mh = m[i] / c1;
        const double vh = v[i] / c2;
        w[i] = static_cast<T>(static_cast<double>(w[i]) - config_.lr * mh / (std::sqrt(vh) + config_.eps));
      }
    }
  }

  long steps() const { return steps_; }

 private:
  AdamConfig config_;
  long steps_ = 0;
  std::unordered_map<const Parameter<T>*, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

}  // namespace zrforge::nn
