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
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "support/gradcheck.hpp"
#include "zrforge/rel_semantics.hpp"

using namespace zrforge;
namespace fs = std::filesystem;

namespace {

TextStore sample_store(std::size_t n, std::uint32_t width = 3) {
  TextStore s(width);
  SplitMix64 rng(5);
  for (RelationId r = 0; r < n; ++r) {
    const auto len = static_cast<std::uint32_t>(1 + r % 3);
    TextMatrix m{len, width, std::vector<float>(len * width)};
    for (auto& v : m.values) v = static_cast<float>(rng.normal());
    s.insert(r, std::move(m));
  }
  return s;
}

std::string to_bytes(const TextStore& s) {
  std::ostringstream out;
  write_zrle(out, s);
  return out.str();
}

TextStore from_bytes(const std::string& bytes) {
  std::istringstream in(bytes);
  return read_zrle(in);
}

}  // namespace

TEST_CASE("ZRLE round trip is bit-identical") {
  const auto s = sample_store(8);
  const auto bytes = to_bytes(s);
  const auto back = from_bytes(bytes);
  CHECK(back == s);
  CHECK(to_bytes(back) == bytes);
  CHECK(back.checksum() == s.checksum());
  // header: magic + version + width + count
  CHECK(bytes.substr(0, 4) == "ZRLE");
  CHECK(bytes.size() == 16 + 8 * 8 + (1 + 2 + 3 + 1 + 2 + 3 + 1 + 2) * 3 * 4);

  const auto path = fs::temp_directory_path() / "zrforge_rel.zrle";
  write_zrle(path, s);
  CHECK(read_zrle(path) == s);
}

TEST_CASE("missing relation 7 of 8 is a coverage error naming it") {
  const auto s = sample_store(7);
  CHECK_NOTHROW(s.require_coverage(7));
  try {
    s.require_coverage(8);
    FAIL("expected CoverageError");
  } catch (const CoverageError& e) {
    CHECK(e.missing() == std::vector<std::size_t>{7});
    CHECK(std::string(e.what()).find("{7}") != std::string::npos);
  }
}

TEST_CASE("every truncation is a format error") {
  const auto bytes = to_bytes(sample_store(4));
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    CHECK_THROWS_AS(from_bytes(bytes.substr(0, n)), FormatError);
  }
}

TEST_CASE("bad magic, version, trailing bytes, duplicates") {
  auto bytes = to_bytes(sample_store(2));
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(from_bytes(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  CHECK_THROWS_AS(from_bytes(bad), FormatError);
  CHECK_THROWS_AS(from_bytes(bytes + "x"), FormatError);
  // relation count 2 -> 3 with the second record repeated
  bad = bytes;
  bad[12] = 3;
  const std::size_t rec1 = 16 + 8 + 3 * 4;
  bad += bytes.substr(rec1);
  CHECK_THROWS_AS(from_bytes(bad), FormatError);
}

TEST_CASE("store rejects inconsistent widths") {
  TextStore s(3);
  CHECK_THROWS_AS(s.insert(0, TextMatrix{1, 2, {0.f, 0.f}}), DataError);
  CHECK_THROWS_AS(s.insert(0, TextMatrix{0, 3, {}}), DataError);
}

TEST_CASE("mock encoder is deterministic and shares tokens") {
  const auto a = mock_encode("cluster1 relation0", 16, 7);
  const auto b = mock_encode("cluster1 relation3", 16, 7);
  CHECK(a == mock_encode("cluster1 relation0", 16, 7));
  REQUIRE(a.length == 2);
  REQUIRE(b.length == 2);
  CHECK(std::ranges::equal(a.row(0), b.row(0)));
  CHECK_FALSE(std::ranges::equal(a.row(1), b.row(1)));
  CHECK(mock_encode("  spaced\tout  ", 4, 0).length == 2);
  CHECK_FALSE(mock_encode("cluster1", 16, 8) == mock_encode("cluster1", 16, 7));
  CHECK_THROWS_AS(mock_encode("   ", 4, 0), DataError);
}

TEST_CASE("no row collisions over 10k random token pairs") {
  SplitMix64 rng(99);
  auto token = [&] {
    std::string t;
    const auto len = 1 + rng.below(8);
    for (std::uint64_t i = 0; i < len; ++i) t.push_back(static_cast<char>('a' + rng.below(26)));
    return t;
  };
  std::size_t compared = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto x = token(), y = token();
    if (x == y) continue;
    ++compared;
    CHECK(mock_token_row(x, 8, 1) != mock_token_row(y, 8, 1));
  }
  CHECK(compared > 9000);
}

TEST_CASE("mock store covers reciprocals; frozen control keeps shapes only") {
  Vocabulary v;
  v.intern("cluster0 relation0");
  v.intern("cluster0 relation1");
  RelationVocab rv(std::move(v));
  rv.add_reciprocals();
  const auto s = mock_store(rv, 8, 3);
  CHECK_NOTHROW(s.require_coverage(4));
  CHECK(s.at(2).length == 3);  // "Inversed cluster0 relation0"
  const auto f = random_frozen_store(s, 3);
  CHECK(f == random_frozen_store(s, 3));
  for (RelationId r = 0; r < 4; ++r) {
    CHECK(f.at(r).length == s.at(r).length);
    CHECK(f.at(r).values != s.at(r).values);
  }
  CHECK_FALSE(std::ranges::equal(f.at(0).row(0), f.at(1).row(0)));

  const auto path = fs::temp_directory_path() / "zrforge_rel_emb.json";
  write_rel_emb_json(path, rv);
  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in);
  CHECK(j["2"]["text"] == "Inversed cluster0 relation0");
  CHECK(j["0"]["erd"] == "cluster0 relation0");
}

TEST_CASE("alignment of a single token is the MLP output") {
  SplitMix64 rng(1);
  nn::ParameterSet<double> ps;
  AlignmentNet<double> net(ps, 4, 3, rng);
  const auto m = mock_encode("solo", 4, 2);
  nn::Tape<double> tape;
  const auto out = net(tape, m);
  const auto r = m.row(0);
  const auto direct = net.mlp()(tape.constant(nn::Tensor<double>::vector({r.begin(), r.end()})));
  CHECK(out.value() == direct.value());
}

TEST_CASE("alignment of two tokens matches hand arithmetic") {
  SplitMix64 rng(1);
  nn::ParameterSet<double> ps;
  AlignmentNet<double> net(ps, 2, 2, rng);
  // MLP: identity weights, tanh hidden, identity output -> w' = tanh(w).
  for (std::size_t l = 0; l < 2; ++l) {
    auto& w = net.mlp().weight(l).value;
    w.storage().assign(4, 0.0);
    w.at(0, 0) = w.at(1, 1) = 1.0;
  }
  // GRU: only the candidate input block is the identity -> z = r = 0.5,
  // c = tanh(x), h' = 0.5 h + 0.5 tanh(x).
  net.gru().w().value.storage().assign(12, 0.0);
  net.gru().u().value.storage().assign(12, 0.0);
  net.gru().w().value.at(4, 0) = net.gru().w().value.at(5, 1) = 1.0;
  const TextMatrix m{2, 2, {0.5f, -1.0f, 1.0f, 0.25f}};
  nn::Tape<double> tape;
  const auto out = net(tape, m);
  const double w0[] = {0.5, -1.0}, w1[] = {1.0, 0.25};
  for (std::size_t i = 0; i < 2; ++i) {
    const double expect = 0.5 * std::tanh(w0[i]) + 0.5 * std::tanh(std::tanh(w1[i]));
    CHECK(out.value()[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("gradients reach alignment parameters, never the text") {
  SplitMix64 rng(4);
  nn::ParameterSet<float> ps;
  AlignmentNet<float> net(ps, 6, 4, rng);
  const auto store = mock_store(RelationVocab([] {
                                  Vocabulary v;
                                  v.intern("a b c");
                                  return v;
                                }()),
                                6, 1);
  const auto before = store.checksum();
  nn::Tape<float> tape;
  const auto y = net(tape, store.at(0));
  tape.backward(testing::project(y, 3));
  for (auto& p : ps) {
    double norm = 0;
    for (const float g : p->grad.storage()) norm += std::abs(g);
    CHECK_MESSAGE(norm > 0, p->name);
  }
  for (std::uint32_t id = 0; id < tape.size(); ++id) {
    if (!tape.is_param(id) && !tape.requires_grad(id)) CHECK_FALSE(tape.has_grad(id));
  }
  CHECK(store.checksum() == before);
}

TEST_CASE("alignment gradient check") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SplitMix64 rng(seed);
    nn::ParameterSet<double> ps;
    AlignmentNet<double> net(ps, 5, 3, rng);
    const auto m = mock_encode("x y z", 5, seed);
    const auto report = testing::check_gradients<double>(ps, [&](nn::Tape<double>& t) {
      return testing::project(net(t, m), seed + 10);
    });
    CHECK_MESSAGE(report.max_error <= 1e-6, report.worst);
  }
}

TEST_CASE("alignment rejects a width mismatch") {
  SplitMix64 rng(1);
  nn::ParameterSet<float> ps;
  AlignmentNet<float> net(ps, 4, 3, rng);
  nn::Tape<float> tape;
  CHECK_THROWS_AS(net(tape, mock_encode("a", 5, 0)), ShapeError);
}

TEST_CASE("batched alignment matches one relation at a time") {
  Vocabulary v;
  for (const char* text : {"a", "b c", "d e f g", "c a"}) v.intern(text);
  RelationVocab rv(std::move(v));
  rv.add_reciprocals();
  const auto store = mock_store(rv, 6, 2);
  SplitMix64 rng(8);
  nn::ParameterSet<float> ps;
  AlignmentNet<float> net(ps, 6, 4, rng);
  nn::Tape<float> tape;
  const auto all = net.align_all(tape, store, rv.size());
  REQUIRE(all.shape() == nn::Shape{8, 4});
  for (RelationId r = 0; r < 8; ++r) CHECK(nn::row(all, r).value() == net(tape, store.at(r)).value());
}
