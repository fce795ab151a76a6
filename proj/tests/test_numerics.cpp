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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "support/gradient_suite.hpp"
#include "zrforge/numerics/layers.hpp"
#include "zrforge/numerics/optim.hpp"

using namespace zrforge;
using namespace zrforge::nn;
using zrforge::testing::random_tensor;

namespace {

template <typename T>
std::vector<T> values_of(const Var<T>& v) {
  return {v.value().storage().begin(), v.value().storage().end()};
}

}  // namespace

TEST_CASE("gru_cell with zero parameters halves the state") {
  Tape<double> t;
  auto x = t.constant(Tensor<double>::vector({0.3, -1.2, 2.0}));
  auto h = t.constant(Tensor<double>::vector({1.0, -4.0}));
  auto w = t.constant(Tensor<double>({6, 3}));
  auto u = t.constant(Tensor<double>({6, 2}));
  auto b = t.constant(Tensor<double>({6}));
  const auto out = values_of(gru_cell(x, h, w, u, b));
  CHECK(out[0] == doctest::Approx(0.5));
  CHECK(out[1] == doctest::Approx(-2.0));
}

TEST_CASE("gru_cell of zero input and zero state is zero") {
  SplitMix64 rng(3);
  Tape<float> t;
  auto x = t.constant(Tensor<float>({4}));
  auto h = t.constant(Tensor<float>({4}));
  auto w = t.constant(random_tensor<float>({12, 4}, rng));
  auto u = t.constant(random_tensor<float>({12, 4}, rng));
  auto b = t.constant(Tensor<float>({12}));
  for (const float v : values_of(gru_cell(x, h, w, u, b))) CHECK(v == 0.0f);
}

TEST_CASE("gru_cell rejects mismatched shapes") {
  Tape<float> t;
  auto x = t.constant(Tensor<float>({3}));
  auto h = t.constant(Tensor<float>({4}));
  auto w = t.constant(Tensor<float>({12, 4}));
  auto u = t.constant(Tensor<float>({12, 4}));
  auto b = t.constant(Tensor<float>({12}));
  CHECK_THROWS_AS(gru_cell(x, h, w, u, b), ShapeError);
}

TEST_CASE("single identity layer is the identity map") {
  ParameterSet<double> ps;
  SplitMix64 rng(1);
  Mlp<double> mlp(ps, "m", MlpSpec{{3, 3}, Activation::kTanh, Activation::kIdentity}, rng);
  mlp.weight(0).value = Tensor<double>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tape<double> t;
  const auto out = values_of(mlp(t.constant(Tensor<double>::vector({0.5, -2.0, 7.0}))));
  CHECK(out == std::vector<double>{0.5, -2.0, 7.0});
}

TEST_CASE("two-layer mlp matches hand arithmetic") {
  ParameterSet<double> ps;
  SplitMix64 rng(1);
  Mlp<double> mlp(ps, "m", MlpSpec{{3, 2, 1}}, rng);
  mlp.weight(0).value = Tensor<double>({2, 3}, {1, 0, -1, 0.5, 0.5, 0});
  mlp.bias(0).value = Tensor<double>::vector({0.1, -0.2});
  mlp.weight(1).value = Tensor<double>({1, 2}, {2, -1});
  mlp.bias(1).value = Tensor<double>::vector({0.5});
  Tape<double> t;
  const auto out = values_of(mlp(t.constant(Tensor<double>::vector({1, 2, 3}))));
  // hidden pre-activations: 1 - 3 + 0.1 = -1.9 and 0.5 + 1 - 0.2 = 1.3
  const double expected = 2.0 * std::tanh(-1.9) - std::tanh(1.3) + 0.5;
  CHECK(out[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("mlp rejects wrong input width") {
  ParameterSet<float> ps;
  SplitMix64 rng(1);
  Mlp<float> mlp(ps, "m", MlpSpec{{3, 2}}, rng);
  Tape<float> t;
  CHECK_THROWS_AS(mlp(t.constant(Tensor<float>({4}))), ShapeError);
}

TEST_CASE("softmax closed forms") {
  Tape<double> t;
  CHECK(values_of(softmax(t.constant(Tensor<double>::vector({4.2})))) == std::vector<double>{1.0});
  const auto p = values_of(softmax(t.constant(Tensor<double>::vector({0.0, std::log(3.0)}))));
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax sums to one and ignores constant shifts") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Tape<float> t;
    auto v = random_tensor<float>({7}, rng, 20.0);
    auto shifted = v;
    const float c = static_cast<float>(rng.uniform(-50.0, 50.0));
    for (auto& x : shifted.storage()) x += c;
    const auto a = values_of(softmax(t.constant(v)));
    const auto b = values_of(softmax(t.constant(shifted)));
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i] > 0.0f);
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-4));
      total += a[i];
    }
    CHECK(std::abs(total - 1.0) <= 1e-6);
  }
}

TEST_CASE("tucker3 with d = 1 is a plain product") {
  Tape<double> t;
  auto w = t.constant(Tensor<double>({1, 1, 1}, {1.5}));
  auto a = t.constant(Tensor<double>::vector({2.0}));
  auto b = t.constant(Tensor<double>::vector({-3.0}));
  auto c = t.constant(Tensor<double>::vector({0.5}));
  CHECK(tucker3(w, a, b, c).value().item() == 1.5 * 2.0 * -3.0 * 0.5);
}

TEST_CASE("tucker3 equals the triple-loop sum exactly") {
  SplitMix64 rng(5);
  for (std::size_t d = 1; d <= 8; ++d) {
    Tape<float> t;
    const auto w = random_tensor<float>({d, d, d}, rng);
    const auto a = random_tensor<float>({d}, rng);
    const auto b = random_tensor<float>({d}, rng);
    const auto c = random_tensor<float>({d}, rng);
    float oracle = 0.0f;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k) oracle += w.at(i, j, k) * a[i] * b[j] * c[k];
    const float got = tucker3(t.constant(w), t.constant(a), t.constant(b), t.constant(c)).value().item();
    CHECK(got == oracle);
  }
}

TEST_CASE("tucker3 rejects non-cubic core") {
  Tape<float> t;
  auto w = t.constant(Tensor<float>({2, 2, 3}));
  auto a = t.constant(Tensor<float>({2}));
  CHECK_THROWS_AS(tucker3(w, a, a, a), ShapeError);
}

TEST_CASE("loss closed forms") {
  ParameterSet<double> ps;
  auto& x = ps.add("x", Tensor<double>::vector({0.3, -1.0, 2.5}));
  {
    Tape<double> t;
    auto loss = mse(t.param(x), t.constant(x.value));
    CHECK(loss.value().item() == 0.0);
    t.backward(loss);
    for (const double g : x.grad.storage()) CHECK(g == 0.0);
  }
  Tape<double> t;
  CHECK(mse(t.constant(Tensor<double>::vector({1, 0})), t.constant(Tensor<double>::vector({0, 1}))).value().item() ==
        doctest::Approx(1.0));
  for (std::size_t k : {1u, 2u, 5u, 8u}) {
    auto logits = t.constant(Tensor<double>({k}, 0.37));
    CHECK(cross_entropy(logits, k - 1).value().item() == doctest::Approx(std::log(static_cast<double>(k))));
  }
  for (const double y : {0.0, 1.0}) {
    std::vector<double> label{y};
    CHECK(bce(t.constant(Tensor<double>::vector({0.5})), std::span<const double>(label)).value().item() ==
          doctest::Approx(std::log(2.0)));
  }
}

TEST_CASE("bce clamps saturated probabilities") {
  Tape<float> t;
  std::vector<float> label{1.0f};
  const float loss = bce(t.constant(Tensor<float>::vector({0.0f})), std::span<const float>(label)).value().item();
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(-std::log(1e-7)).epsilon(1e-4));
}

TEST_CASE("cross_entropy rejects bad target") {
  Tape<float> t;
  CHECK_THROWS_AS(cross_entropy(t.constant(Tensor<float>({3})), 3), ShapeError);
}

TEST_CASE("backward of a sum is all ones") {
  ParameterSet<float> ps;
  auto& x = ps.add("x", Tensor<float>::vector({1, 2, 3, 4}));
  Tape<float> t;
  t.backward(sum(t.param(x)));
  for (const float g : x.grad.storage()) CHECK(g == 1.0f);
}

TEST_CASE("backward accumulates across calls and leaves unreached parameters at zero") {
  ParameterSet<float> ps;
  auto& x = ps.add("x", Tensor<float>::vector({1, 2}));
  auto& unused = ps.add("unused", Tensor<float>::vector({5}));
  Tape<float> t;
  auto loss = dot(t.param(x), t.param(x));
  t.backward(loss);
  t.backward(loss);
  CHECK(x.grad[0] == 4.0f);
  CHECK(x.grad[1] == 8.0f);
  CHECK(unused.grad[0] == 0.0f);
}

TEST_CASE("backward requires a scalar") {
  ParameterSet<float> ps;
  auto& x = ps.add("x", Tensor<float>::vector({1, 2}));
  Tape<float> t;
  CHECK_THROWS_AS(t.backward(tanh(t.param(x))), ShapeError);
}

TEST_CASE("constants never receive gradient") {
  ParameterSet<float> ps;
  auto& w = ps.add("w", Tensor<float>({2, 2}, {1, 2, 3, 4}));
  Tape<float> t;
  auto frozen = t.constant(Tensor<float>::vector({1, -1}));
  t.backward(sum(matvec(t.param(w), frozen)));
  CHECK_FALSE(t.requires_grad(frozen.id()));
  CHECK_FALSE(t.has_grad(frozen.id()));
  CHECK(w.grad[0] == 1.0f);
  CHECK(w.grad[1] == -1.0f);
}

TEST_CASE_TEMPLATE("finite-difference agreement for every kernel", T, float, double) {
  for (const auto& [name, instance] : zrforge::testing::numerics_grad_instances<T>()) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto report = instance(1000 + seed);
      worst = std::max(worst, report.max_error);
      if (report.max_error > zrforge::testing::GradTolerance<T>::tol) MESSAGE(name << ": " << report.worst);
    }
    INFO(name);
    CHECK(worst <= zrforge::testing::GradTolerance<T>::tol);
  }
}

TEST_CASE("clip_grad_norm bounds the global norm") {
  ParameterSet<double> ps;
  auto& a = ps.add("a", Tensor<double>::vector({0, 0}));
  auto& b = ps.add("b", Tensor<double>::vector({0}));
  a.grad = Tensor<double>::vector({3, 0});
  b.grad = Tensor<double>::vector({4});
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad[0] == doctest::Approx(0.6));
  CHECK(b.grad[0] == doctest::Approx(0.8));
}

TEST_CASE("adam moves against the gradient by about lr on the first step") {
  ParameterSet<double> ps;
  auto& p = ps.add("p", Tensor<double>::vector({1.0, 1.0}));
  p.grad = Tensor<double>::vector({0.5, -2.0});
  Adam<double> opt(AdamConfig{.lr = 0.01});
  opt.step(ps);
  CHECK(p.value[0] == doctest::Approx(0.99));
  CHECK(p.value[1] == doctest::Approx(1.01));
}

TEST_CASE("row-batched kernels agree with their per-vector forms") {
  SplitMix64 rng(77);
  ParameterSet<float> ps;
  Mlp<float> mlp(ps, "mlp", MlpSpec{{4, 5, 3}}, rng);
  Gru<float> gru(ps, "gru", 3, 3, rng);
  auto& core = ps.add("core", zrforge::testing::random_tensor<float>({3, 3, 3}, rng));
  Tape<float> tape;
  const auto x = tape.constant(zrforge::testing::random_tensor<float>({4, 4}, rng));
  const auto h = tape.constant(zrforge::testing::random_tensor<float>({4, 3}, rng));
  const auto y = mlp.rows(x);
  const auto g = gru.rows(y, h);
  const auto k = tucker_contract_rows(tape.param(core), g, h);
  const auto logits = matmul_nt(g, h);
  const std::vector<std::uint32_t> targets = {0, 3, 1, 1};
  const auto ce = cross_entropy_rows<float>(logits, targets);
  float ce_sum = 0;
  for (std::size_t r = 0; r < 4; ++r) {
    const auto yr = mlp(row(x, r));
    CHECK(row(y, r).value() == yr.value());
    const auto gr = gru(yr, row(h, r));
    CHECK(row(g, r).value() == gr.value());
    CHECK(row(k, r).value() == tucker_contract(tape.param(core), gr, row(h, r)).value());
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(logits.value().at(r, c) == doctest::Approx(dot(gr, row(h, c)).value()[0]).epsilon(1e-6));
    }
    ce_sum += cross_entropy(row(logits, r), targets[r]).value()[0];
  }
  CHECK(ce.value()[0] == doctest::Approx(ce_sum / 4).epsilon(1e-6));
}

TEST_CASE("segment mean of an empty segment is zero") {
  Tape<double> tape;
  const auto x = tape.constant(Tensor<double>({2, 2}, std::vector<double>{1, 2, 3, 4}));
  const std::vector<std::uint32_t> offsets = {0, 0, 2};
  const auto m = segment_mean<double>(x, offsets);
  CHECK(m.value().storage() == std::vector<double>{0, 0, 2, 3});
  const std::vector<std::uint32_t> bad = {0, 1};
  CHECK_THROWS_AS(segment_mean<double>(x, bad), ShapeError);
}
