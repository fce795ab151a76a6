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

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "zrforge/numerics/ops.hpp"
#include "zrforge/rng.hpp"

namespace zrforge::testing {

// Finite-difference step and tolerance per scalar width.
template <typename T>
struct GradTolerance;
template <>
struct GradTolerance<float> {
  static constexpr double step = 1e-3;
  static constexpr double tol = 1e-3;
};
template <>
struct GradTolerance<double> {
  static constexpr double step = 1e-6;
  static constexpr double tol = 1e-6;
};

struct GradReport {
  double max_error = 0.0;
  std::string worst;
};

// |analytic - numeric| / max(1, |analytic|, |numeric|).
inline double grad_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

// Compares backward() against central differences for every element of
// every parameter in `params`. `loss` rebuilds the scalar loss on a fresh tape.
template <typename T>
GradReport check_gradients(nn::ParameterSet<T>& params, const std::function<nn::Var<T>(nn::Tape<T>&)>& loss) {
  params.zero_grad();
  {
    nn::Tape<T> tape;
    tape.backward(loss(tape));
  }
  const T h = static_cast<T>(GradTolerance<T>::step);
  GradReport report;
  for (auto& p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const T saved = p->value[i];
      p->value[i] = saved + h;
      double up, down;
      {
        nn::Tape<T> tape;
        up = static_cast<double>(loss(tape).value()[0]);
      }
      p->value[i] = saved - h;
      {
        nn::Tape<T> tape;
        down = static_cast<double>(loss(tape).value()[0]);
      }
      p->value[i] = saved;
      // divide by the step actually taken after rounding to T
      const double step = static_cast<double>(static_cast<T>(saved + h)) - static_cast<double>(static_cast<T>(saved - h));
      const double numeric = (up - down) / step;
      const double err = grad_error(static_cast<double>(p->grad[i]), numeric);
      if (err > report.max_error) {
        report.max_error = err;
        report.worst = p->name + "[" + std::to_string(i) + "] analytic=" + std::to_string(p->grad[i]) +
                       " numeric=" + std::to_string(numeric);
      }
    }
  }
  return report;
}

// Random projection sum_i c_i y_i with fixed coefficients in [-1, 1]; turns a
// vector output into a scalar loss with a non-trivial gradient.
template <typename T>
nn::Var<T> project(const nn::Var<T>& y, std::uint64_t seed) {
  SplitMix64 rng(seed);
  nn::Tensor<T> c(y.shape());
  for (auto& v : c.storage()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return nn::sum(nn::mul(y, y.tape().constant(std::move(c))));
}

template <typename T>
nn::Tensor<T> random_tensor(nn::Shape shape, SplitMix64& rng, double bound = 1.0) {
  nn::Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace zrforge::testing
