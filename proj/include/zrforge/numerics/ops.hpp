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
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "zrforge/numerics/tape.hpp"

// Differentiable kernels. Every op records its value on the operands' tape
// together with a closure that propagates the output gradient to the
// operands that require one.
namespace zrforge::nn {

namespace detail {

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename T>
void require_vector(const Var<T>& a, const char* op) {
  if (a.shape().size() != 1) {
    throw ShapeError(std::string(op) + ": expected vector, got " + shape_string(a.shape()));
  }
}

template <typename T>
void require_matrix(const Var<T>& a, const char* op) {
  if (a.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected matrix, got " + shape_string(a.shape()));
  }
}

template <typename T>
T sigmoid(T x) {
  return x >= T{0} ? T{1} / (T{1} + std::exp(-x)) : std::exp(x) / (T{1} + std::exp(x));
}

}  // namespace detail

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a, b, "add");
  Tensor<T> out = a.value();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad(self);
    for (const auto id : {ia, ib}) {
      if (T* d = t.grad_ptr(id)) {
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
    }
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a, b, "sub");
  Tensor<T> out = a.value();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad(self);
    if (T* d = t.grad_ptr(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (T* d = t.grad_ptr(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  });
}

// Elementwise product.
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a, b, "mul");
  Tensor<T> out = a.value();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad(self);
    const T* av = t.value(ia).data();
    const T* bv = t.value(ib).data();
    if (T* d = t.grad_ptr(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (T* d = t.grad_ptr(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T c) {
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v *= c;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, c](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad(self);
    T* d = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += c * g[i];
  });
}

// a * s where s holds a single value.
template <typename T>
Var<T> mul_scalar(const Var<T>& a, const Var<T>& s) {
  if (s.size() != 1) throw ShapeError("mul_scalar: multiplier must hold one value");
  const T c = s.value()[0];
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v *= c;
  const auto ia = a.id(), is = s.id();
  return a.tape().record(std::move(out), {a, s}, [ia, is](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad(self);
    const T c = t.value(is)[0];
    if (T* d = t.grad_ptr(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += c * g[i];
    }
    if (T* d = t.grad_ptr(is)) {
      const T* av = t.value(ia).data();
      T acc{0};
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
      d[0] += acc;
    }
  });
}

template <typename T>
Var<T> add_n(std::span<const Var<T>> xs) {
  if (xs.empty()) throw ShapeError("add_n: no operands");
  Tensor<T> out = xs[0].value();
  for (std::size_t k = 1; k < xs.size(); ++k) {
    detail::require_same(xs[0], xs[k], "add_n");
    const T* v = xs[k].value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  std::vector<std::uint32_t> ids;
  ids.reserve(xs.size());
  for (const auto& x : xs) ids.push_back(x.id());
  return xs[0].tape().record(std::move(out), xs, [ids = std::move(ids)](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad(self);
    for (const auto id : ids) {
      if (T* d = t.grad_ptr(id)) {
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
    }
  });
}

template <typename T>
Var<T> concat(const Var<T>& a, const Var<T>& b) {
  detail::require_vector(a, "concat");
  detail::require_vector(b, "concat");
  const std::size_t na = a.size(), nb = b.size();
  std::vector<T> out(a.value().storage());
  out.insert(out.end(), b.value().storage().begin(), b.value().storage().end());
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(Tensor<T>::vector(std::move(out)), {a, b},
                         [ia, ib, na, nb](Tape<T>& t, std::uint32_t self) {
                           const T* g = t.grad(self).data();
                           if (T* d = t.grad_ptr(ia)) {
                             for (std::size_t i = 0; i < na; ++i) d[i] += g[i];
                           }
                           if (T* d = t.grad_ptr(ib)) {
                             for (std::size_t i = 0; i < nb; ++i) d[i] += g[na + i];
                           }
                         });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T acc{0};
  for (const T v : a.value().storage()) acc += v;
  const auto ia = a.id();
  return a.tape().record(Tensor<T>::scalar(acc), {a}, [ia](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad(self)[0];
    for (auto& d : t.grad(ia).storage()) d += g;
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T{1} / static_cast<T>(a.size()));
}

template <typename T>
Var<T> dot(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a, b, "dot");
  const T* av = a.value().data();
  const T* bv = b.value().data();
  T acc{0};
  for (std::size_t i = 0; i < a.size(); ++i) acc += av[i] * bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(Tensor<T>::scalar(acc), {a, b}, [ia, ib](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad(self)[0];
    const Tensor<T>& av = t.value(ia);
    const Tensor<T>& bv = t.value(ib);
    if (T* d = t.grad_ptr(ia)) {
      for (std::size_t i = 0; i < av.size(); ++i) d[i] += g * bv[i];
    }
    if (T* d = t.grad_ptr(ib)) {
      for (std::size_t i = 0; i < av.size(); ++i) d[i] += g * av[i];
    }
  });
}

// W x (+ b). W is [m x n], x is [n], b is [m] or an invalid Var for none.
template <typename T>
Var<T> linear(const Var<T>& w, const Var<T>& b, const Var<T>& x) {
  detail::require_matrix(w, "linear");
  detail::require_vector(x, "linear");
  const std::size_t m = w.shape()[0], n = w.shape()[1];
  if (x.size() != n) {
    throw ShapeError("linear: weight " + shape_string(w.shape()) + " applied to " +
                     shape_string(x.shape()));
  }
  if (b.valid() && b.shape() != Shape{m}) throw ShapeError("linear: bias shape " + shape_string(b.shape()));
  Tensor<T> out(Shape{m});
  const T* wv = w.value().data();
  const T* xv = x.value().data();
  for (std::size_t i = 0; i < m; ++i) {
    T acc = b.valid() ? b.value()[i] : T{0};
    const T* wr = wv + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * xv[j];
    out[i] = acc;
  }
  const auto iw = w.id(), ix = x.id();
  const bool has_b = b.valid();
  const auto ib = has_b ? b.id() : 0u;
  auto fn = [iw, ix, ib, has_b, m, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad(self).data();
    if (T* dw = t.grad_ptr(iw)) {
      const T* xv = t.value(ix).data();
      for (std::size_t i = 0; i < m; ++i) {
        const T gi = g[i];
        if (gi == T{0}) continue;
        T* row = dw + i * n;
        for (std::size_t j = 0; j < n; ++j) row[j] += gi * xv[j];
      }
    }
    if (T* dx = t.grad_ptr(ix)) {
      const T* wv = t.value(iw).data();
      for (std::size_t i = 0; i < m; ++i) {
        const T gi = g[i];
        const T* wr = wv + i * n;
        for (std::size_t j = 0; j < n; ++j) dx[j] += gi * wr[j];
      }
    }
    if (has_b) {
      if (T* db = t.grad_ptr(ib)) {
        for (std::size_t i = 0; i < m; ++i) db[i] += g[i];
      }
    }
  };
  if (has_b) return w.tape().record(std::move(out), {w, b, x}, std::move(fn));
  return w.tape().record(std::move(out), {w, x}, std::move(fn));
}

template <typename T>
Var<T> matvec(const Var<T>& m, const Var<T>& x) {
  return linear(m, Var<T>{}, x);
}

// M^T x: weighted sum of the rows of M [m x n] with weights x [m].
template <typename T>
Var<T> vecmat(const Var<T>& x, const Var<T>& m) {
  detail::require_matrix(m, "vecmat");
  detail::require_vector(x, "vecmat");
  const std::size_t rows = m.shape()[0], cols = m.shape()[1];
  if (x.size() != rows) throw ShapeError("vecmat: " + shape_string(x.shape()) + " x " + shape_string(m.shape()));
  Tensor<T> out(Shape{cols});
  const T* mv = m.value().data();
  const T* xv = x.value().data();
  for (std::size_t i = 0; i < rows; ++i) {
    const T* r = mv + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += xv[i] * r[j];
  }
  const auto ix = x.id(), im = m.id();
  return m.tape().record(std::move(out), {x, m}, [ix, im, rows, cols](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad(self).data();
    if (T* dx = t.grad_ptr(ix)) {
      const T* mv = t.value(im).data();
      for (std::size_t i = 0; i < rows; ++i) {
        T acc{0};
        for (std::size_t j = 0; j < cols; ++j) acc += g[j] * mv[i * cols + j];
        dx[i] += acc;
      }
    }
    if (T* dm = t.grad_ptr(im)) {
      const T* xv = t.value(ix).data();
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) dm[i * cols + j] += xv[i] * g[j];
      }
    }
  });
}

// Stacks equally sized vectors into the rows of a matrix.
template <typename T>
Var<T> stack(std::span<const Var<T>> rows) {
  if (rows.empty()) throw ShapeError("stack: no rows");
  const std::size_t d = rows[0].size();
  Tensor<T> out(Shape{rows.size(), d});
  std::vector<std::uint32_t> ids;
  ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail::require_vector(rows[i], "stack");
    if (rows[i].size() != d) throw ShapeError("stack: ragged rows");
    std::copy_n(rows[i].value().data(), d, out.data() + i * d);
    ids.push_back(rows[i].id());
  }
  return rows[0].tape().record(std::move(out), rows, [ids = std::move(ids), d](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad(self).data();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (T* dr = t.grad_ptr(ids[i])) {
        for (std::size_t j = 0; j < d; ++j) dr[j] += g[i * d + j];
      }
    }
  });
}

template <typename T>
Var<T> row(const Var<T>& m, std::size_t i) {
  detail::require_matrix(m, "row");
  const std::size_t cols = m.shape()[1];
  if (i >= m.shape()[0]) throw ShapeError("row: index out of range");
  std::vector<T> out(m.value().data() + i * cols, m.value().data() + (i + 1) * cols);
  const auto im = m.id();
  return m.tape().record(Tensor<T>::vector(std::move(out)), {m}, [im, i, cols](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad(self).data();
    T* dm = t.grad(im).data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) dm[j] += g[j];
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v = detail::sigmoid(v);
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& y = t.value(self);
    T* d = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (T{1} - y[i]);
  });
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v = std::tanh(v);
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& y = t.value(self);
    T* d = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (T{1} - y[i] * y[i]);
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> out = a.value();
  for (auto& v : out.storage()) v = v > T{0} ? v : T{0};
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& y = t.value(self);
    T* d = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (y[i] > T{0}) d[i] += g[i];
    }
  });
}

// Max-shifted softmax over a vector.
template <typename T>
Var<T> softmax(const Var<T>& a) {
  detail::require_vector(a, "softmax");
  Tensor<T> out = a.value();
  const T mx = *std::max_element(out.storage().begin(), out.storage().end());
  T z{0};
  for (auto& v : out.storage()) {
    v = std::exp(v - mx);
    z += v;
  }
  for (auto& v : out.storage()) v /= z;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](Tape<T>& t, std::uint32_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& y = t.value(self);
    T inner{0};
    for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * y[i];
    T* d = t.grad(ia).data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += y[i] * (g[i] - inner);
  });
}

// Full contraction sum_{i,j,k} W[i,j,k] a[i] b[j] c[k], accumulated in
// i-major, then j, then k order into a single running sum.
template <typename T>
Var<T> tucker3(const Var<T>& w, const Var<T>& a, const Var<T>& b, const Var<T>& c) {
  const std::size_t d = a.size();
  if (w.shape() != Shape{d, d, d} || a.shape() != Shape{d} || b.shape() != Shape{d} ||
      c.shape() != Shape{d}) {
    throw ShapeError("tucker3: core " + shape_string(w.shape()) + " with vectors " +
                     shape_string(a.shape()) + ", " + shape_string(b.shape()) + ", " +
                     shape_string(c.shape()));
  }
  const T* wv = w.value().data();
  const T* av = a.value().data();
  const T* bv = b.value().data();
  const T* cv = c.value().data();
  T acc{0};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) acc += wv[(i * d + j) * d + k] * av[i] * bv[j] * cv[k];
    }
  }
  const auto iw = w.id(), ia = a.id(), ib = b.id(), ic = c.id();
  return w.tape().record(Tensor<T>::scalar(acc), {w, a, b, c}, [iw, ia, ib, ic, d](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad(self)[0];
    const T* wv = t.value(iw).data();
    const T* av = t.value(ia).data();
    const T* bv = t.value(ib).data();
    const T* cv = t.value(ic).data();
    T* dw = t.grad_ptr(iw);
    T* da = t.grad_ptr(ia);
    T* db = t.grad_ptr(ib);
    T* dc = t.grad_ptr(ic);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const T* wr = wv + (i * d + j) * d;
        T wc{0};
        for (std::size_t k = 0; k < d; ++k) {
          wc += wr[k] * cv[k];
          if (dw) dw[(i * d + j) * d + k] += g * av[i] * bv[j] * cv[k];
          if (dc) dc[k] += g * wr[k] * av[i] * bv[j];
        }
        if (da) da[i] += g * wc * bv[j];
        if (db) db[j] += g * wc * av[i];
      }
    }
  });
}

// v[k] = sum_{i,j} W[i,j,k] a[i] b[j]; tucker3(W,a,b,c) == dot(v, c) up to
// summation order. Lets one contraction score many third-mode candidates.
template <typename T>
Var<T> tucker_contract(const Var<T>& w, const Var<T>& a, const Var<T>& b) {
  const std::size_t d = a.size();
  if (w.shape() != Shape{d, d, d} || a.shape() != Shape{d} || b.shape() != Shape{d}) {
    throw ShapeError("tucker_contract: core " + shape_string(w.shape()) + " with vectors " +
                     shape_string(a.shape()) + ", " + shape_string(b.shape()));
  }
  Tensor<T> out(Shape{d});
  const T* wv = w.value().data();
  const T* av = a.value().data();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const T ab = av[i] * bv[j];
      const T* wr = wv + (i * d + j) * d;
      for (std::size_t k = 0; k < d; ++k) out[k] += wr[k] * ab;
    }
  }
  const auto iw = w.id(), ia = a.id(), ib = b.id();
  return w.tape().record(std::move(out), {w, a, b}, [iw, ia, ib, d](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad(self).data();
    const T* wv = t.value(iw).data();
    const T* av = t.value(ia).data();
    const T* bv = t.value(ib).data();
    T* dw = t.grad_ptr(iw);
    T* da = t.grad_ptr(ia);
    T* db = t.grad_ptr(ib);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const T* wr = wv + (i * d + j) * d;
        T wg{0};
        for (std::size_t k = 0; k < d; ++k) wg += wr[k] * g[k];
        if (da) da[i] += wg * bv[j];
        if (db) db[j] += wg * av[i];
        if (dw) {
          const T ab = av[i] * bv[j];
          T* dr = dw + (i * d + j) * d;
          for (std::size_t k = 0; k < d; ++k) dr[k] += ab * g[k];
        }
      }
    }
  });
}

namespace detail {

// One GRU step on raw buffers. `gates` receives z, r, c and r*h (4d values),
// which gru_backward needs again.
template <typename T>
void gru_forward(const T* xv, const T* hv, const T* wv, const T* uv, const T* bv, std::size_t n_in, std::size_t d,
                 T* gates, T* out) {
  T* z = gates;
  T* r = z + d;
  T* c = r + d;
  T* rh = c + d;
  for (std::size_t i = 0; i < 2 * d; ++i) {
    T acc = bv[i];
    const T* wr = wv + i * n_in;
    for (std::size_t j = 0; j < n_in; ++j) acc += wr[j] * xv[j];
    const T* ur = uv + i * d;
    for (std::size_t j = 0; j < d; ++j) acc += ur[j] * hv[j];
    z[i] = sigmoid(acc);  // fills z then r
  }
  for (std::size_t i = 0; i < d; ++i) rh[i] = r[i] * hv[i];
  for (std::size_t i = 0; i < d; ++i) {
    T acc = bv[2 * d + i];
    const T* wr = wv + (2 * d + i) * n_in;
    for (std::size_t j = 0; j < n_in; ++j) acc += wr[j] * xv[j];
    const T* ur = uv + (2 * d + i) * d;
    for (std::size_t j = 0; j < d; ++j) acc += ur[j] * rh[j];
    c[i] = std::tanh(acc);
  }
  for (std::size_t i = 0; i < d; ++i) out[i] = (T{1} - z[i]) * hv[i] + z[i] * c[i];
}

// Accumulates the gradients of one GRU step; null outputs are skipped.
// `scratch` holds 4d values.
template <typename T>
void gru_backward(const T* g, const T* xv, const T* hv, const T* wv, const T* uv, const T* gates, std::size_t n_in,
                  std::size_t d, T* dx, T* dh, T* dw, T* du, T* db, T* scratch) {
  const T* z = gates;
  const T* r = z + d;
  const T* c = r + d;
  const T* rh = c + d;
  // pre-activation gradients, blocks z, r, c
  T* da = scratch;
  T* drh = scratch + 3 * d;
  for (std::size_t i = 0; i < d; ++i) {
    da[i] = g[i] * (c[i] - hv[i]) * z[i] * (T{1} - z[i]);
    da[2 * d + i] = g[i] * z[i] * (T{1} - c[i] * c[i]);
    drh[i] = T{0};
    if (dh) dh[i] += g[i] * (T{1} - z[i]);
  }
  for (std::size_t i = 0; i < d; ++i) {
    const T a = da[2 * d + i];
    const T* ur = uv + (2 * d + i) * d;
    for (std::size_t j = 0; j < d; ++j) drh[j] += a * ur[j];
  }
  for (std::size_t i = 0; i < d; ++i) {
    da[d + i] = drh[i] * hv[i] * r[i] * (T{1} - r[i]);
    if (dh) dh[i] += drh[i] * r[i];
  }
  for (std::size_t i = 0; i < 3 * d; ++i) {
    const T a = da[i];
    if (db) db[i] += a;
    if (a == T{0}) continue;
    const T* wr = wv + i * n_in;
    if (dx) {
      for (std::size_t j = 0; j < n_in; ++j) dx[j] += a * wr[j];
    }
    if (dw) {
      T* dwr = dw + i * n_in;
      for (std::size_t j = 0; j < n_in; ++j) dwr[j] += a * xv[j];
    }
    const T* hin = i < 2 * d ? hv : rh;
    if (du) {
      T* dur = du + i * d;
      for (std::size_t j = 0; j < d; ++j) dur[j] += a * hin[j];
    }
    if (dh && i < 2 * d) {
      const T* ur = uv + i * d;
      for (std::size_t j = 0; j < d; ++j) dh[j] += a * ur[j];
    }
  }
}

template <typename T>
void require_gru_params(const Var<T>& w, const Var<T>& u, const Var<T>& b, std::size_t n_in, std::size_t d,
                        const char* op) {
  if (w.shape() != Shape{3 * d, n_in} || u.shape() != Shape{3 * d, d} || b.shape() != Shape{3 * d}) {
    throw ShapeError(std::string(op) + ": W " + shape_string(w.shape()) + ", U " + shape_string(u.shape()) +
                     ", b " + shape_string(b.shape()) + " for input width " + std::to_string(n_in) +
                     " and state width " + std::to_string(d));
  }
}

}  // namespace detail

// Gated recurrent unit step:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   c = tanh(Wc x + Uc (r * h) + bc)
//   h' = (1 - z) * h + z * c
// W is [3d x d_in], U is [3d x d], b is [3d]; row blocks ordered z, r, c.
template <typename T>
Var<T> gru_cell(const Var<T>& x, const Var<T>& h, const Var<T>& w, const Var<T>& u, const Var<T>& b) {
  detail::require_vector(x, "gru_cell");
  detail::require_vector(h, "gru_cell");
  const std::size_t n_in = x.size(), d = h.size();
  detail::require_gru_params(w, u, b, n_in, d, "gru_cell");
  std::vector<T> gates(4 * d);
  Tensor<T> out(Shape{d});
  detail::gru_forward(x.value().data(), h.value().data(), w.value().data(), u.value().data(), b.value().data(), n_in,
                      d, gates.data(), out.data());
  const auto ix = x.id(), ih = h.id(), iw = w.id(), iu = u.id(), ib = b.id();
  return x.tape().record(
      std::move(out), {x, h, w, u, b},
      [ix, ih, iw, iu, ib, n_in, d, gates = std::move(gates)](Tape<T>& t, std::uint32_t self) {
        std::vector<T> scratch(4 * d);
        detail::gru_backward(t.grad(self).data(), t.value(ix).data(), t.value(ih).data(), t.value(iw).data(),
                             t.value(iu).data(), gates.data(), n_in, d, t.grad_ptr(ix), t.grad_ptr(ih),
                             t.grad_ptr(iw), t.grad_ptr(iu), t.grad_ptr(ib), scratch.data());
      });
}

// Mean of squared differences.
template <typename T>
Var<T> mse(const Var<T>& u, const Var<T>& v) {
  detail::require_same(u, v, "mse");
  const std::size_t n = u.size();
  const T* uv = u.value().data();
  const T* vv = v.value().data();
  T acc{0};
  for (std::size_t i = 0; i < n; ++i) acc += (uv[i] - vv[i]) * (uv[i] - vv[i]);
  const auto iu = u.id(), iv = v.id();
  return u.tape().record(Tensor<T>::scalar(acc / static_cast<T>(n)), {u, v}, [iu, iv, n](Tape<T>& t, std::uint32_t self) {
    const T g = t.grad(self)[0] * T{2} / static_cast<T>(n);
    const T* uv = t.value(iu).data();
    const T* vv = t.value(iv).data();
    T* du = t.grad_ptr(iu);
    T* dv = t.grad_ptr(iv);
    for (std::size_t i = 0; i < n; ++i) {
      const T diff = g * (uv[i] - vv[i]);
      if (du) du[i] += diff;
      if (dv) dv[i] -= diff;
    }
  });
}

// -log softmax(logits)[target], via log-sum-exp.
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::size_t target) {
  detail::require_vector(logits, "cross_entropy");
  const std::size_t n = logits.size();
  if (target >= n) {
    throw ShapeError("cross_entropy: target " + std::to_string(target) + " out of " + std::to_string(n));
  }
  const T* lv = logits.value().data();
  const T mx = *std::max_element(lv, lv + n);
  T z{0};
  for (std::size_t i = 0; i < n; ++i) z += std::exp(lv[i] - mx);
  const T lse = mx + std::log(z);
  const auto il = logits.id();
  return logits.tape().record(Tensor<T>::scalar(lse - lv[target]), {logits},
                              [il, n, target, lse](Tape<T>& t, std::uint32_t self) {
                                const T g = t.grad(self)[0];
                                const T* lv = t.value(il).data();
                                T* d = t.grad(il).data();
                                for (std::size_t i = 0; i < n; ++i) d[i] += g * std::exp(lv[i] - lse);
                                d[target] -= g;
                              });
}

template <typename T>
inline constexpr T kBceEpsilon = T(1e-7);

// Mean binary cross-entropy of probabilities against 0/1 labels. Probabilities
// are clamped into [eps, 1 - eps]; the clamp has zero gradient outside.
template <typename T>
Var<T> bce(const Var<T>& prob, std::span<const T> labels) {
  const std::size_t n = prob.size();
  if (labels.size() != n) throw ShapeError("bce: label count mismatch");
  const T lo = kBceEpsilon<T>, hi = T{1} - kBceEpsilon<T>;
  const T* pv = prob.value().data();
  T acc{0};
  for (std::size_t i = 0; i < n; ++i) {
    const T p = std::clamp(pv[i], lo, hi);
    acc -= labels[i] * std::log(p) + (T{1} - labels[i]) * std::log(T{1} - p);
  }
  const auto ip = prob.id();
  std::vector<T> y(labels.begin(), labels.end());
  return prob.tape().record(Tensor<T>::scalar(acc / static_cast<T>(n)), {prob},
                            [ip, n, lo, hi, y = std::move(y)](Tape<T>& t, std::uint32_t self) {
                              const T g = t.grad(self)[0] / static_cast<T>(n);
                              const T* pv = t.value(ip).data();
                              T* d = t.grad(ip).data();
                              for (std::size_t i = 0; i < n; ++i) {
                                const T p = pv[i];
                                if (p < lo || p > hi) continue;
                                d[i] += g * (-y[i] / p + (T{1} - y[i]) / (T{1} - p));
                              }
                            });
}

}  // namespace zrforge::nn
