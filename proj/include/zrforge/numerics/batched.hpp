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

// Row-batched kernels: the same maps as ops.hpp applied to every row of a
// matrix in one tape node.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zrforge/numerics/ops.hpp"

namespace zrforge::nn {

// Rows idx of M [n x d], in order; repeats allowed.
template <typename T>
Var<T> gather_rows(const Var<T>& m, std::span<const std::uint32_t> idx) {
  detail::require_matrix(m, "gather_rows");
  const std::size_t n = m.shape()[0], d = m.shape()[1];
  Tensor<T> out(Shape{idx.size(), d});
  const T* mv = m.value().data();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= n) throw ShapeError("gather_rows: row " + std::to_string(idx[k]) + " of " + std::to_string(n));
    std::copy_n(mv + std::size_t{idx[k]} * d, d, out.data() + k * d);
  }
  const auto im = m.id();
  return m.tape().record(std::move(out), {m},
                         [im, d, idx = std::vector<std::uint32_t>(idx.begin(), idx.end())](Tape<T>& t,
                                                                                          std::uint32_t self) {
                           const T* g = t.grad(self).data();
                           T* dm = t.grad(im).data();
                           for (std::size_t k = 0; k < idx.size(); ++k) {
                             T* dr = dm + std::size_t{idx[k]} * d;
                             for (std::size_t j = 0; j < d; ++j) dr[j] += g[k * d + j];
                           }
                         });
}

// Copy of M with rows idx (distinct) replaced by the rows of R.
template <typename T>
Var<T> scatter_rows(const Var<T>& m, std::span<const std::uint32_t> idx, const Var<T>& r) {
  detail::require_matrix(m, "scatter_rows");
  detail::require_matrix(r, "scatter_rows");
  const std::size_t n = m.shape()[0], d = m.shape()[1];
  if (r.shape() != Shape{idx.size(), d}) {
    throw ShapeError("scatter_rows: " + shape_string(r.shape()) + " into " + shape_string(m.shape()));
  }
  Tensor<T> out = m.value();
  const T* rv = r.value().data();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= n) throw ShapeError("scatter_rows: row " + std::to_string(idx[k]) + " of " + std::to_string(n));
    std::copy_n(rv + k * d, d, out.data() + std::size_t{idx[k]} * d);
  }
  const auto im = m.id(), ir = r.id();
  return m.tape().record(
      std::move(out), {m, r},
      [im, ir, n, d, idx = std::vector<std::uint32_t>(idx.begin(), idx.end())](Tape<T>& t, std::uint32_t self) {
        const T* g = t.grad(self).data();
        if (T* dm = t.grad_ptr(im)) {
          std::vector<bool> replaced(n, false);
          for (const auto i : idx) replaced[i] = true;
          for (std::size_t i = 0; i < n; ++i) {
            if (replaced[i]) continue;
            for (std::size_t j = 0; j < d; ++j) dm[i * d + j] += g[i * d + j];
          }
        }
        if (T* dr = t.grad_ptr(ir)) {
          for (std::size_t k = 0; k < idx.size(); ++k) {
            for (std::size_t j = 0; j < d; ++j) dr[k * d + j] += g[std::size_t{idx[k]} * d + j];
          }
        }
      });
}

// Row g of the result is the mean of X rows [offsets[g], offsets[g+1]); an
// empty segment gives a zero row.
template <typename T>
Var<T> segment_mean(const Var<T>& x, std::span<const std::uint32_t> offsets) {
  detail::require_matrix(x, "segment_mean");
  const std::size_t m = x.shape()[0], c = x.shape()[1];
  if (offsets.empty() || offsets.back() != m) throw ShapeError("segment_mean: offsets do not cover the rows");
  const std::size_t groups = offsets.size() - 1;
  Tensor<T> out(Shape{groups, c});
  const T* xv = x.value().data();
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = offsets[g], hi = offsets[g + 1];
    if (hi <= lo) continue;
    T* o = out.data() + g * c;
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t j = 0; j < c; ++j) o[j] += xv[i * c + j];
    }
    const T inv = T{1} / static_cast<T>(hi - lo);
    for (std::size_t j = 0; j < c; ++j) o[j] *= inv;
  }
  const auto ix = x.id();
  return x.tape().record(
      std::move(out), {x},
      [ix, c, groups, offsets = std::vector<std::uint32_t>(offsets.begin(), offsets.end())](Tape<T>& t,
                                                                                          std::uint32_t self) {
        const T* g = t.grad(self).data();
        T* dx = t.grad(ix).data();
        for (std::size_t k = 0; k < groups; ++k) {
          const std::size_t lo = offsets[k], hi = offsets[k + 1];
          if (hi <= lo) continue;
          const T inv = T{1} / static_cast<T>(hi - lo);
          for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t j = 0; j < c; ++j) dx[i * c + j] += inv * g[k * c + j];
          }
        }
      });
}

// [A | B] for A [m x a], B [m x b].
template <typename T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  detail::require_matrix(a, "concat_cols");
  detail::require_matrix(b, "concat_cols");
  const std::size_t m = a.shape()[0], na = a.shape()[1], nb = b.shape()[1];
  if (b.shape()[0] != m) throw ShapeError("concat_cols: " + shape_string(a.shape()) + " | " + shape_string(b.shape()));
  Tensor<T> out(Shape{m, na + nb});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.value().data() + i * na, na, out.data() + i * (na + nb));
    std::copy_n(b.value().data() + i * nb, nb, out.data() + i * (na + nb) + na);
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, na, nb](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad(self).data();
    T* da = t.grad_ptr(ia);
    T* db = t.grad_ptr(ib);
    for (std::size_t i = 0; i < m; ++i) {
      const T* gr = g + i * (na + nb);
      if (da) {
        for (std::size_t j = 0; j < na; ++j) da[i * na + j] += gr[j];
      }
      if (db) {
        for (std::size_t j = 0; j < nb; ++j) db[i * nb + j] += gr[na + j];
      }
    }
  });
}

// A B^T for A [m x k], B [n x k].
template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  detail::require_matrix(a, "matmul_nt");
  detail::require_matrix(b, "matmul_nt");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) throw ShapeError("matmul_nt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()) + "^T");
  Tensor<T> out(Shape{m, n});
  const T* av = a.value().data();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < m; ++i) {
    const T* ar = av + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* br = bv + j * k;
      T acc{0};
      for (std::size_t l = 0; l < k; ++l) acc += ar[l] * br[l];
      out[i * n + j] = acc;
    }
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, k, n](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad(self).data();
    const T* av = t.value(ia).data();
    const T* bv = t.value(ib).data();
    T* da = t.grad_ptr(ia);
    T* db = t.grad_ptr(ib);
    for (std::size_t i = 0; i < m; ++i) {
      const T* ar = av + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const T gij = g[i * n + j];
        if (gij == T{0}) continue;
        const T* br = bv + j * k;
        if (da) {
          T* dar = da + i * k;
          for (std::size_t l = 0; l < k; ++l) dar[l] += gij * br[l];
        }
        if (db) {
          T* dbr = db + j * k;
          for (std::size_t l = 0; l < k; ++l) dbr[l] += gij * ar[l];
        }
      }
    }
  });
}

// X W^T (+ b) for W [o x i], X [m x i], b [o] or an invalid Var.
template <typename T>
Var<T> linear_rows(const Var<T>& w, const Var<T>& b, const Var<T>& x) {
  detail::require_matrix(w, "linear_rows");
  detail::require_matrix(x, "linear_rows");
  const std::size_t o = w.shape()[0], in = w.shape()[1], m = x.shape()[0];
  if (x.shape()[1] != in) {
    throw ShapeError("linear_rows: weight " + shape_string(w.shape()) + " applied to " + shape_string(x.shape()));
  }
  if (b.valid() && b.shape() != Shape{o}) throw ShapeError("linear_rows: bias shape " + shape_string(b.shape()));
  Tensor<T> out(Shape{m, o});
  const T* wv = w.value().data();
  const T* xv = x.value().data();
  for (std::size_t r = 0; r < m; ++r) {
    const T* xr = xv + r * in;
    for (std::size_t i = 0; i < o; ++i) {
      T acc = b.valid() ? b.value()[i] : T{0};
      const T* wr = wv + i * in;
      for (std::size_t j = 0; j < in; ++j) acc += wr[j] * xr[j];
      out[r * o + i] = acc;
    }
  }
  const auto iw = w.id(), ix = x.id();
  const bool has_b = b.valid();
  const auto ib = has_b ? b.id() : 0u;
  auto fn = [iw, ix, ib, has_b, o, in, m](Tape<T>& t, std::uint32_t self) {
    const T* g = t.grad(self).data();
    const T* wv = t.value(iw).data();
    const T* xv = t.value(ix).data();
    T* dw = t.grad_ptr(iw);
    T* dx = t.grad_ptr(ix);
    T* db = has_b ? t.grad_ptr(ib) : nullptr;
    for (std::size_t r = 0; r < m; ++r) {
      const T* xr = xv + r * in;
      for (std::size_t i = 0; i < o; ++i) {
        const T gi = g[r * o + i];
        if (db) db[i] += gi;
        if (gi == T{0}) continue;
        if (dw) {
          T* dwr = dw + i * in;
          for (std::size_t j = 0; j < in; ++j) dwr[j] += gi * xr[j];
        }
        if (dx) {
          const T* wr = wv + i * in;
          T* dxr = dx + r * in;
          for (std::size_t j = 0; j < in; ++j) dxr[j] += gi * wr[j];
        }
      }
    }
  };
  if (has_b) return w.tape().record(std::move(out), {w, b, x}, std::move(fn));
  return w.tape().record(std::move(out), {w, x}, std::move(fn));
}

// gru_cell on every row: X [m x d_in], H [m x d].
template <typename T>
Var<T> gru_rows(const Var<T>& x, const Var<T>& h, const Var<T>& w, const Var<T>& u, const Var<T>& b) {
  detail::require_matrix(x, "gru_rows");
  detail::require_matrix(h, "gru_rows");
  const std::size_t m = x.shape()[0], n_in = x.shape()[1], d = h.shape()[1];
  if (h.shape()[0] != m) throw ShapeError("gru_rows: " + shape_string(x.shape()) + " with state " + shape_string(h.shape()));
  detail::require_gru_params(w, u, b, n_in, d, "gru_rows");
  std::vector<T> gates(m * 4 * d);
  Tensor<T> out(Shape{m, d});
  const T* xv = x.value().data();
  const T* hv = h.value().data();
  for (std::size_t r = 0; r < m; ++r) {
    detail::gru_forward(xv + r * n_in, hv + r * d, w.value().data(), u.value().data(), b.value().data(), n_in, d,
                        gates.data() + r * 4 * d, out.data() + r * d);
  }
  const auto ix = x.id(), ih = h.id(), iw = w.id(), iu = u.id(), ib = b.id();
  return x.tape().record(
      std::move(out), {x, h, w, u, b},
      [ix, ih, iw, iu, ib, m, n_in, d, gates = std::move(gates)](Tape<T>& t, std::uint32_t self) {
        std::vector<T> scratch(4 * d);
        const T* g = t.grad(self).data();
        const T* xv = t.value(ix).data();
        const T* hv = t.value(ih).data();
        T* dx = t.grad_ptr(ix);
        T* dh = t.grad_ptr(ih);
        T* dw = t.grad_ptr(iw);
        T* du = t.grad_ptr(iu);
        T* db = t.grad_ptr(ib);
        for (std::size_t r = 0; r < m; ++r) {
          detail::gru_backward(g + r * d, xv + r * n_in, hv + r * d, t.value(iw).data(), t.value(iu).data(),
                               gates.data() + r * 4 * d, n_in, d, dx ? dx + r * n_in : nullptr,
                               dh ? dh + r * d : nullptr, dw, du, db, scratch.data());
        }
      });
}

// Row r: v[k] = sum_{i,j} W[i,j,k] A[r,i] B[r,j].
template <typename T>
Var<T> tucker_contract_rows(const Var<T>& w, const Var<T>& a, const Var<T>& b) {
  detail::require_matrix(a, "tucker_contract_rows");
  const std::size_t m = a.shape()[0], d = a.shape()[1];
  if (w.shape() != Shape{d, d, d} || b.shape() != a.shape()) {
    throw ShapeError("tucker_contract_rows: core " + shape_string(w.shape()) + " with " + shape_string(a.shape()) +
                     ", " + shape_string(b.shape()));
  }
  Tensor<T> out(Shape{m, d});
  const T* wv = w.value().data();
  for (std::size_t r = 0; r < m; ++r) {
    const T* av = a.value().data() + r * d;
    const T* bv = b.value().data() + r * d;
    T* o = out.data() + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const T ab = av[i] * bv[j];
        const T* wr = wv + (i * d + j) * d;
        for (std::size_t k = 0; k < d; ++k) o[k] += wr[k] * ab;
      }
    }
  }
  const auto iw = w.id(), ia = a.id(), ib = b.id();
  return w.tape().record(std::move(out), {w, a, b}, [iw, ia, ib, m, d](Tape<T>& t, std::uint32_t self) {
    const T* wv = t.value(iw).data();
    T* dw = t.grad_ptr(iw);
    T* da = t.grad_ptr(ia);
    T* db = t.grad_ptr(ib);
    for (std::size_t r = 0; r < m; ++r) {
      const T* g = t.grad(self).data() + r * d;
      const T* av = t.value(ia).data() + r * d;
      const T* bv = t.value(ib).data() + r * d;
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          const T* wr = wv + (i * d + j) * d;
          if (da || db) {
            T wg{0};
            for (std::size_t k = 0; k < d; ++k) wg += wr[k] * g[k];
            if (da) da[r * d + i] += wg * bv[j];
            if (db) db[r * d + j] += wg * av[i];
          }
          if (dw) {
            const T ab = av[i] * bv[j];
            T* dr = dw + (i * d + j) * d;
            for (std::size_t k = 0; k < d; ++k) dr[k] += ab * g[k];
          }
        }
      }
    }
  });
}

// Mean over rows of -log softmax(L[r])[targets[r]].
template <typename T>
Var<T> cross_entropy_rows(const Var<T>& logits, std::span<const std::uint32_t> targets) {
  detail::require_matrix(logits, "cross_entropy_rows");
  const std::size_t m = logits.shape()[0], n = logits.shape()[1];
  if (targets.size() != m) throw ShapeError("cross_entropy_rows: target count mismatch");
  const T* lv = logits.value().data();
  std::vector<T> lse(m);
  T total{0};
  for (std::size_t r = 0; r < m; ++r) {
    if (targets[r] >= n) throw ShapeError("cross_entropy_rows: target " + std::to_string(targets[r]) + " out of " + std::to_string(n));
    const T* row = lv + r * n;
    const T mx = *std::max_element(row, row + n);
    T z{0};
    for (std::size_t i = 0; i < n; ++i) z += std::exp(row[i] - mx);
    lse[r] = mx + std::log(z);
    total += lse[r] - row[targets[r]];
  }
  const auto il = logits.id();
  return logits.tape().record(
      Tensor<T>::scalar(total / static_cast<T>(m)), {logits},
      [il, m, n, lse = std::move(lse), targets = std::vector<std::uint32_t>(targets.begin(), targets.end())](
          Tape<T>& t, std::uint32_t self) {
        const T g = t.grad(self)[0] / static_cast<T>(m);
        const T* lv = t.value(il).data();
        T* d = t.grad(il).data();
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t i = 0; i < n; ++i) d[r * n + i] += g * std::exp(lv[r * n + i] - lse[r]);
          d[r * n + targets[r]] -= g;
        }
      });
}

// Reference to one row of a matrix Var, or to a whole vector Var (row 0).
template <typename T>
struct RowRef {
  Var<T> source;
  std::uint32_t row = 0;
};

// Matrix whose k-th row is copied from refs[k].
template <typename T>
Var<T> assemble_rows(std::span<const RowRef<T>> refs) {
  if (refs.empty()) throw ShapeError("assemble_rows: no rows");
  const std::size_t d = refs[0].source.shape().back();
  Tensor<T> out(Shape{refs.size(), d});
  std::vector<Var<T>> parents;
  std::vector<std::uint32_t> ids, rows;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto& ref = refs[k];
    const auto& shape = ref.source.shape();
    const bool vec = shape.size() == 1;
    if (shape.back() != d || (vec && ref.row != 0) || (!vec && ref.row >= shape[0])) {
      throw ShapeError("assemble_rows: bad row reference into " + shape_string(shape));
    }
    std::copy_n(ref.source.value().data() + std::size_t{ref.row} * d, d, out.data() + k * d);
    parents.push_back(ref.source);
    ids.push_back(ref.source.id());
    rows.push_back(ref.row);
  }
  return parents[0].tape().record(std::move(out), parents,
                                  [d, ids = std::move(ids), rows = std::move(rows)](Tape<T>& t, std::uint32_t self) {
                                    const T* g = t.grad(self).data();
                                    for (std::size_t k = 0; k < ids.size(); ++k) {
                                      T* dst = t.grad_ptr(ids[k]);
                                      if (!dst) continue;
                                      dst += std::size_t{rows[k]} * d;
                                      for (std::size_t j = 0; j < d; ++j) dst[j] += g[k * d + j];
                                    }
                                  });
}

}  // namespace zrforge::nn
