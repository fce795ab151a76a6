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
#include <string>
#include <vector>

#include "zrforge/numerics/batched.hpp"
#include "zrforge/numerics/ops.hpp"
#include "zrforge/rng.hpp"

namespace zrforge::nn {

enum class Activation { kIdentity, kTanh, kRelu, kSigmoid };

template <typename T>
Var<T> activate(const Var<T>& x, Activation act) {
  switch (act) {
    case Activation::kTanh:
      return tanh(x);
    case Activation::kRelu:
      return relu(x);
    case Activation::kSigmoid:
      return sigmoid(x);
    case Activation::kIdentity:
      break;
  }
  return x;
}

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, SplitMix64& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, SplitMix64& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

struct MlpSpec {
  std::vector<std::size_t> widths;  // input width first, output width last
  Activation hidden = Activation::kTanh;
  Activation output = Activation::kIdentity;
};

// Stack of affine layers; every layer but the last uses `hidden`.
template <typename T>
class Mlp {
 public:
  Mlp(ParameterSet<T>& params, const std::string& prefix, MlpSpec spec, SplitMix64& rng)
      : spec_(std::move(spec)) {
    if (spec_.widths.size() < 2) throw ShapeError("mlp needs at least input and output width");
    for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
      const std::size_t in = spec_.widths[l], out = spec_.widths[l + 1];
      const std::string name = prefix + ".layer" + std::to_string(l);
      weights_.push_back(&params.add(name + ".weight", xavier_uniform<T>({out, in}, in, out, rng)));
      biases_.push_back(&params.add(name + ".bias", Tensor<T>(Shape{out})));
    }
  }

  std::size_t in_dim() const { return spec_.widths.front(); }
  std::size_t out_dim() const { return spec_.widths.back(); }
  std::size_t depth() const { return weights_.size(); }
  Parameter<T>& weight(std::size_t l) { return *weights_.at(l); }
  Parameter<T>& bias(std::size_t l) { return *biases_.at(l); }

  Var<T> operator()(const Var<T>& x) const {
    if (x.size() != in_dim()) {
      throw ShapeError("mlp expects width " + std::to_string(in_dim()) + ", got " + shape_string(x.shape()));
    }
    Tape<T>& tape = x.tape();
    Var<T> h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h = linear(tape.param(*weights_[l]), tape.param(*biases_[l]), h);
      h = activate(h, l + 1 == weights_.size() ? spec_.output : spec_.hidden);
    }
    return h;
  }

  // Applies the MLP to every row of X [m x in].
  Var<T> rows(const Var<T>& x) const {
    if (x.shape().size() != 2 || x.shape()[1] != in_dim()) {
      throw ShapeError("mlp rows expect width " + std::to_string(in_dim()) + ", got " + shape_string(x.shape()));
    }
    Tape<T>& tape = x.tape();
    Var<T> h = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h = linear_rows(tape.param(*weights_[l]), tape.param(*biases_[l]), h);
      h = activate(h, l + 1 == weights_.size() ? spec_.output : spec_.hidden);
    }
    return h;
  }

 private:
  MlpSpec spec_;
  std::vector<Parameter<T>*> weights_;
  std::vector<Parameter<T>*> biases_;
};

// Parameters of one GRU cell (see gru_cell for the gate equations).
template <typename T>
class Gru {
 public:
  Gru(ParameterSet<T>& params, const std::string& prefix, std::size_t input_dim, std::size_t state_dim,
      SplitMix64& rng)
      : input_dim_(input_dim), state_dim_(state_dim) {
    Tensor<T> w({3 * state_dim, input_dim});
    Tensor<T> u({3 * state_dim, state_dim});
    const double bw = std::sqrt(6.0 / static_cast<double>(input_dim + state_dim));
    const double bu = std::sqrt(6.0 / static_cast<double>(2 * state_dim));
    for (auto& v : w.storage()) v = static_cast<T>(rng.uniform(-bw, bw));
    for (auto& v : u.storage()) v = static_cast<T>(rng.uniform(-bu, bu));
    w_ = &params.add(prefix + ".w", std::move(w));
    u_ = &params.add(prefix + ".u", std::move(u));
    b_ = &params.add(prefix + ".b", Tensor<T>(Shape{3 * state_dim}));
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t state_dim() const { return state_dim_; }
  Parameter<T>& w() { return *w_; }
  Parameter<T>& u() { return *u_; }
  Parameter<T>& b() { return *b_; }

  Var<T> operator()(const Var<T>& x, const Var<T>& h) const {
    Tape<T>& tape = x.tape();
    return gru_cell(x, h, tape.param(*w_), tape.param(*u_), tape.param(*b_));
  }

  Var<T> rows(const Var<T>& x, const Var<T>& h) const {
    Tape<T>& tape = x.tape();
    return gru_rows(x, h, tape.param(*w_), tape.param(*u_), tape.param(*b_));
  }

 private:
  std::size_t input_dim_;
  std::size_t state_dim_;
  Parameter<T>* w_;
  Parameter<T>* u_;
  Parameter<T>* b_;
};

}  // namespace zrforge::nn
