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
#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zrforge/error.hpp"
#include "zrforge/kg_data.hpp"
#include "zrforge/numerics/layers.hpp"
#include "zrforge/rng.hpp"

namespace zrforge {

// Frozen token-level encoding of one relation text: L rows of width d_w.
struct TextMatrix {
  std::uint32_t length = 0;
  std::uint32_t width = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t l) const { return {values.data() + l * width, width}; }
  friend bool operator==(const TextMatrix&, const TextMatrix&) = default;
};

class TextStore {
 public:
  explicit TextStore(std::uint32_t width = 0) : width_(width) {}

  std::uint32_t width() const { return width_; }
  std::size_t size() const { return matrices_.size(); }
  bool contains(RelationId r) const { return matrices_.count(r) != 0; }
  const TextMatrix& at(RelationId r) const;
  const std::map<RelationId, TextMatrix>& matrices() const { return matrices_; }

  // Throws DataError on width mismatch or an empty matrix.
  void insert(RelationId r, TextMatrix m);

  // Throws CoverageError listing every id in [0, n) without a matrix.
  void require_coverage(std::size_t num_relations) const;

  // FNV-1a over ids, shapes and raw float bytes.
  std::uint64_t checksum() const;

  friend bool operator==(const TextStore&, const TextStore&) = default;

 private:
  std::uint32_t width_;
  std::map<RelationId, TextMatrix> matrices_;
};

// ZRLE, little-endian: "ZRLE", u32 version (1), u32 d_w, u32 n, then per
// relation u32 id, u32 L, L * d_w float32.
inline constexpr std::uint32_t kZrleVersion = 1;
void write_zrle(std::ostream& out, const TextStore& store);
void write_zrle(const std::filesystem::path& path, const TextStore& store);
// Throws FormatError on bad magic/version, duplicates or truncation.
TextStore read_zrle(std::istream& in);
TextStore read_zrle(const std::filesystem::path& path);

// Sidecar: {"<id>": {"text": ..., "erd": ...}}.
void write_rel_emb_json(const std::filesystem::path& path, const RelationVocab& relations,
                        std::span<const std::string> erds = {});

// One standard-normal row per whitespace token, seeded by (token, seed).
TextMatrix mock_encode(std::string_view text, std::uint32_t width, std::uint64_t seed);
std::vector<float> mock_token_row(std::string_view token, std::uint32_t width, std::uint64_t seed);

// Mock matrices for every relation of the vocabulary (reciprocals included).
TextStore mock_store(const RelationVocab& relations, std::uint32_t width, std::uint64_t seed);

// Same shapes as `like`, rows drawn per relation from an unrelated stream.
TextStore random_frozen_store(const TextStore& like, std::uint64_t seed);

// Maps a text matrix to a d-dimensional relation representation: a tanh MLP
// (d_w -> d -> d) applied to every token row, then a GRU over the mapped rows
// started from the first one. A single-token text maps to MLP(w_0).
template <typename T>
class AlignmentNet {
 public:
  AlignmentNet(nn::ParameterSet<T>& params, std::size_t width, std::size_t dim, SplitMix64& rng)
      : mlp_(params, "align.mlp", nn::MlpSpec{{width, dim, dim}}, rng), gru_(params, "align.gru", dim, dim, rng) {}

  std::size_t dim() const { return mlp_.out_dim(); }
  nn::Mlp<T>& mlp() { return mlp_; }
  nn::Gru<T>& gru() { return gru_; }

  nn::Var<T> operator()(nn::Tape<T>& tape, const TextMatrix& m) const {
    if (m.width != mlp_.in_dim()) {
      throw ShapeError("text matrix width " + std::to_string(m.width) + " does not match alignment input " +
                       std::to_string(mlp_.in_dim()));
    }
    if (m.length == 0) throw ShapeError("empty text matrix");
    auto token = [&](std::size_t l) {
      const auto r = m.row(l);
      return mlp_(tape.constant(nn::Tensor<T>::vector(std::vector<T>(r.begin(), r.end()))));
    };
    nn::Var<T> h = token(0);
    for (std::size_t l = 1; l < m.length; ++l) h = gru_(token(l), h);
    return h;
  }

  // Representations of relations 0..n-1 as rows of one [n x d] matrix.
  // Tokens of all relations go through the MLP together; the GRU then
  // advances, at step l, only the relations with more than l tokens.
  nn::Var<T> align_all(nn::Tape<T>& tape, const TextStore& store, std::size_t n) const {
    if (store.width() != mlp_.in_dim()) {
      throw ShapeError("text store width " + std::to_string(store.width()) + " does not match alignment input " +
                       std::to_string(mlp_.in_dim()));
    }
    std::vector<std::uint32_t> first(n), lengths(n);
    std::vector<T> tokens;
    std::uint32_t max_len = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto& m = store.at(static_cast<RelationId>(r));
      first[r] = static_cast<std::uint32_t>(tokens.size() / m.width);
      lengths[r] = m.length;
      max_len = std::max(max_len, m.length);
      tokens.insert(tokens.end(), m.values.begin(), m.values.end());
    }
    const std::size_t total = tokens.size() / store.width();
    const auto mapped = mlp_.rows(tape.constant(nn::Tensor<T>({total, std::size_t{store.width()}}, std::move(tokens))));
    nn::Var<T> h = nn::gather_rows<T>(mapped, first);
    for (std::uint32_t l = 1; l < max_len; ++l) {
      std::vector<std::uint32_t> active, rows;
      for (std::size_t r = 0; r < n; ++r) {
        if (lengths[r] > l) {
          active.push_back(static_cast<std::uint32_t>(r));
          rows.push_back(first[r] + l);
        }
      }
      const auto next = gru_.rows(nn::gather_rows<T>(mapped, rows), nn::gather_rows<T>(h, active));
      h = nn::scatter_rows<T>(h, active, next);
    }
    return h;
  }

 private:
  nn::Mlp<T> mlp_;
  nn::Gru<T> gru_;
};

}  // namespace zrforge
