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


#include "zrforge/rel_semantics.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "byte_io.hpp"
#include "json.hpp"

namespace zrforge {

const TextMatrix& TextStore::at(RelationId r) const {
  const auto it = matrices_.find(r);
  if (it == matrices_.end()) throw CoverageError({r}, "no text matrix for relation " + std::to_string(r));
  return it->second;
}

void TextStore::insert(RelationId r, TextMatrix m) {
  if (m.length == 0) throw DataError("relation " + std::to_string(r) + " has an empty text matrix");
  if (m.width != width_) {
    throw DataError("relation " + std::to_string(r) + " has width " + std::to_string(m.width) + ", store has " +
                    std::to_string(width_));
  }
  if (m.values.size() != std::size_t{m.length} * m.width) throw DataError("text matrix size mismatch");
  matrices_[r] = std::move(m);
}

void TextStore::require_coverage(std::size_t num_relations) const {
  std::vector<std::size_t> missing;
  for (std::size_t r = 0; r < num_relations; ++r) {
    if (!matrices_.count(static_cast<RelationId>(r))) missing.push_back(r);
  }
  if (missing.empty()) return;
  std::string ids;
  for (const auto r : missing) ids += (ids.empty() ? "" : ", ") + std::to_string(r);
  throw CoverageError(missing, "text matrices missing for relations {" + ids + "}");
}

std::uint64_t TextStore::checksum() const {
  std::uint64_t h = fnv1a64("");
  auto feed = [&h](const void* p, std::size_t n) {
    h = fnv1a64(std::string_view(static_cast<const char*>(p), n), h);
  };
  feed(&width_, sizeof width_);
  for (const auto& [r, m] : matrices_) {
    feed(&r, sizeof r);
    feed(&m.length, sizeof m.length);
    feed(m.values.data(), m.values.size() * sizeof(float));
  }
  return h;
}

using detail::put_f32;
using detail::put_u32;

void write_zrle(std::ostream& out, const TextStore& store) {
  std::string buf = "ZRLE";
  put_u32(buf, kZrleVersion);
  put_u32(buf, store.width());
  put_u32(buf, static_cast<std::uint32_t>(store.size()));
  for (const auto& [r, m] : store.matrices()) {
    put_u32(buf, r);
    put_u32(buf, m.length);
    for (const float v : m.values) put_f32(buf, v);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing ZRLE data");
}

void write_zrle(const std::filesystem::path& path, const TextStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_zrle(out, store);
}

TextStore read_zrle(std::istream& in) {
  detail::ByteReader rd(std::string(std::istreambuf_iterator<char>(in), {}), "ZRLE");
  rd.need(4, "magic");
  if (rd.take(4) != "ZRLE") throw FormatError("not a ZRLE file (bad magic)");
  const auto version = rd.u32("version");
  if (version != kZrleVersion) throw FormatError("unsupported ZRLE version " + std::to_string(version));
  const auto width = rd.u32("width");
  if (width == 0) throw FormatError("ZRLE width is zero");
  const auto n = rd.u32("relation count");
  TextStore store(width);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto r = rd.u32("relation id");
    const auto length = rd.u32("token count");
    if (length == 0) throw FormatError("relation " + std::to_string(r) + " has zero tokens");
    if (store.contains(r)) throw FormatError("duplicate relation " + std::to_string(r));
    const std::size_t count = std::size_t{length} * width;
    if (count > rd.remaining() / 4) throw FormatError("ZRLE truncated in relation " + std::to_string(r));
    TextMatrix m{length, width, std::vector<float>(count)};
    for (auto& v : m.values) v = rd.f32("values");
    store.insert(r, std::move(m));
  }
  if (rd.remaining() != 0) throw FormatError("trailing bytes after ZRLE payload");
  return store;
}

TextStore read_zrle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_zrle(in);
}

void write_rel_emb_json(const std::filesystem::path& path, const RelationVocab& relations,
                        std::span<const std::string> erds) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (RelationId r = 0; r < relations.size(); ++r) {
    const auto& text = relations.text(r);
    j[std::to_string(r)] = {{"text", text}, {"erd", r < erds.size() ? erds[r] : text}};
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<float> mock_token_row(std::string_view token, std::uint32_t width, std::uint64_t seed) {
  SplitMix64 rng(mix64(fnv1a64(token) ^ mix64(seed)));
  std::vector<float> row(width);
  for (auto& v : row) v = static_cast<float>(rng.normal());
  return row;
}

TextMatrix mock_encode(std::string_view text, std::uint32_t width, std::uint64_t seed) {
  TextMatrix m{0, width, {}};
  std::istringstream words{std::string(text)};
  std::string token;
  while (words >> token) {
    const auto row = mock_token_row(token, width, seed);
    m.values.insert(m.values.end(), row.begin(), row.end());
    ++m.length;
  }
  if (m.length == 0) throw DataError("cannot encode an empty relation text");
  return m;
}

TextStore mock_store(const RelationVocab& relations, std::uint32_t width, std::uint64_t seed) {
  TextStore store(width);
  for (RelationId r = 0; r < relations.size(); ++r) store.insert(r, mock_encode(relations.text(r), width, seed));
  return store;
}

TextStore random_frozen_store(const TextStore& like, std::uint64_t seed) {
  TextStore store(like.width());
  for (const auto& [r, m] : like.matrices()) {
    SplitMix64 rng(mix64(derive_seed(seed, "frozen") ^ mix64(r)));
    TextMatrix out{m.length, m.width, std::vector<float>(m.values.size())};
    for (auto& v : out.values) v = static_cast<float>(rng.normal());
    store.insert(r, std::move(out));
  }
  return store;
}

}  // namespace zrforge
