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


#include "zrforge/forecaster.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "byte_io.hpp"
#include "zrforge/error.hpp"
#include "zrforge/numerics/layers.hpp"
#include "zrforge/rng.hpp"

namespace zrforge {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename U>
U parse_number(std::string_view key, std::string_view text) {
  U v{};
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw std::invalid_argument("config key " + std::string(key) + ": bad value '" + std::string(text) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("config key " + std::string(key) + ": expected true or false, got '" +
                              std::string(text) + "'");
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid config: " + what); };
  if (dim == 0) fail("dim must be positive");
  if (max_history_len == 0) fail("max_history_len must be positive");
  if (!std::isfinite(alpha)) fail("alpha must be finite");
  if (!std::isfinite(gamma)) fail("gamma must be finite");
  if (!std::isfinite(eta) || eta < 0.0) fail("eta must be finite and >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
  if (!(grad_clip > 0.0) || !std::isfinite(grad_clip)) fail("grad_clip must be positive");
  if (epochs == 0) fail("epochs must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
  return {
      {"dim", std::to_string(c.dim)},
      {"window", std::to_string(c.window)},
      {"max_history_len", std::to_string(c.max_history_len)},
      {"alpha", format_double(c.alpha)},
      {"gamma_mode", c.gamma_mode == GammaMode::kFixed ? "fixed" : "learnable"},
      {"gamma", format_double(c.gamma)},
      {"eta", format_double(c.eta)},
      {"learning_rate", format_double(c.learning_rate)},
      {"grad_clip", format_double(c.grad_clip)},
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"negatives", std::to_string(c.negatives)},
      {"seed", std::to_string(c.seed)},
      {"no_rhl", c.no_rhl ? "true" : "false"},
      {"random_frozen_rel_emb", c.random_frozen_rel_emb ? "true" : "false"},
  };
}

void set_config_value(TrainConfig& c, std::string_view key, std::string_view value) {
  if (key == "dim") {
    c.dim = parse_number<std::size_t>(key, value);
  } else if (key == "window") {
    c.window = parse_number<std::size_t>(key, value);
  } else if (key == "max_history_len") {
    c.max_history_len = parse_number<std::size_t>(key, value);
  } else if (key == "alpha") {
    c.alpha = parse_number<double>(key, value);
  } else if (key == "gamma_mode") {
    if (value == "fixed") {
      c.gamma_mode = GammaMode::kFixed;
    } else if (value == "learnable") {
      c.gamma_mode = GammaMode::kLearnable;
    } else {
      throw std::invalid_argument("config key gamma_mode: expected fixed or learnable, got '" + std::string(value) +
                                  "'");
    }
  } else if (key == "gamma") {
    c.gamma = parse_number<double>(key, value);
  } else if (key == "eta") {
    c.eta = parse_number<double>(key, value);
  } else if (key == "learning_rate") {
    c.learning_rate = parse_number<double>(key, value);
  } else if (key == "grad_clip") {
    c.grad_clip = parse_number<double>(key, value);
  } else if (key == "epochs") {
    c.epochs = parse_number<std::size_t>(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "negatives") {
    c.negatives = parse_number<std::size_t>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "no_rhl") {
    c.no_rhl = parse_bool(key, value);
  } else if (key == "random_frozen_rel_emb") {
    c.random_frozen_rel_emb = parse_bool(key, value);
  } else {
    throw std::invalid_argument("unknown config key '" + std::string(key) + "'");
  }
}

void write_config(std::ostream& out, const TrainConfig& config) {
  for (const auto& [k, v] : config_entries(config)) out << k << '=' << v << '\n';
}

TrainConfig parse_config(std::istream& in) {
  TrainConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
    }
    set_config_value(c, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return c;
}

TrainConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_config(in);
}

nn::Var<float> total_score(const nn::Var<float>& base, const nn::Var<float>& rhl, float gamma) {
  return nn::add(base, nn::scale(rhl, gamma));
}

nn::Var<float> total_loss(const nn::Var<float>& tkgf, const nn::Var<float>& hist, const nn::Var<float>& rhl,
                          float eta) {
  std::vector<nn::Var<float>> terms{tkgf};
  if (hist.valid()) terms.push_back(hist);
  if (rhl.valid() && eta != 0.0f) terms.push_back(nn::scale(rhl, eta));
  return terms.size() == 1 ? terms[0] : nn::add_n<float>(terms);
}

Forecaster::Forecaster(const TkgDataset& dataset, const TextStore& texts, const TrainConfig& config)
    : config_(config),
      texts_(config.random_frozen_rel_emb ? random_frozen_store(texts, config.seed) : texts),
      dataset_checksum_(dataset.checksum()),
      num_entities_(dataset.num_entities()),
      num_relations_(dataset.num_relations()),
      first_eval_(dataset.first_eval) {
  config_.validate();
  if (!dataset.relations.has_reciprocals()) throw std::logic_error("forecaster needs reciprocal relations");
  if (num_entities_ == 0) throw DataError("dataset has no entities");
  texts_.require_coverage(num_relations_);
  const std::size_t d = config_.dim;

  SplitMix64 align_rng(derive_seed(config_.seed, "align"));
  align_ = std::make_unique<AlignmentNet<float>>(params_, texts_.width(), d, align_rng);

  SplitMix64 base_rng(derive_seed(config_.seed, "base"));
  entity_ = &params_.add("entity.embedding", nn::xavier_uniform<float>({num_entities_, d}, d, d, base_rng));
  msg_ = &params_.add("entity.msg", nn::xavier_uniform<float>({d, 2 * d}, 2 * d, d, base_rng));
  entity_gru_ = std::make_unique<nn::Gru<float>>(params_, "entity.gru", d, d, base_rng);

  if (!config_.no_rhl) {
    SplitMix64 rhl_rng(derive_seed(config_.seed, "rhl"));
    rhl_ = std::make_unique<RelationHistoryLearner<float>>(params_, d, static_cast<float>(config_.alpha), rhl_rng);
    if (config_.gamma_mode == GammaMode::kLearnable) {
      gamma_ = &params_.add("gamma", nn::Tensor<float>::vector({static_cast<float>(config_.gamma)}));
    }
  }
}

std::size_t Forecaster::rhl_parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p->name.starts_with("rhl.") || p->name == "gamma") n += p->value.size();
  }
  return n;
}

bool Forecaster::rhl_in_use() const {
  return rhl_ && (gamma_ || config_.gamma != 0.0 || config_.eta != 0.0);
}

double Forecaster::gamma() const {
  if (!rhl_) return 0.0;
  return gamma_ ? gamma_->value[0] : config_.gamma;
}

nn::Var<float> Forecaster::relation_embeddings(nn::Tape<float>& tape) const {
  return align_->align_all(tape, texts_, num_relations_);
}

nn::Var<float> Forecaster::evolve(nn::Tape<float>& tape, const SnapshotSource& source,
                                  const nn::Var<float>& relations, Timestamp from, Timestamp to) const {
  if (from > to || to > source.num_timestamps()) {
    throw std::out_of_range("evolution window [" + std::to_string(from) + ", " + std::to_string(to) +
                            ") outside the indexed timeline");
  }
  nn::Var<float> h = tape.param(*entity_);
  const auto w_msg = tape.param(*msg_);
  for (Timestamp tau = from; tau < to; ++tau) {
    const Snapshot& snap = source.snapshot(tau);
    if (snap.targets.empty()) continue;
    std::vector<std::uint32_t> rels, srcs;
    rels.reserve(snap.edges.size());
    srcs.reserve(snap.edges.size());
    for (const auto& e : snap.edges) {
      rels.push_back(e.rel);
      srcs.push_back(e.src);
    }
    const auto cat = nn::concat_cols(nn::gather_rows<float>(relations, rels), nn::gather_rows<float>(h, srcs));
    const auto msg = nn::linear_rows(w_msg, nn::Var<float>{}, nn::segment_mean<float>(cat, snap.offsets));
    const auto next = entity_gru_->rows(msg, nn::gather_rows<float>(h, snap.targets));
    h = nn::scatter_rows<float>(h, snap.targets, next);
  }
  return h;
}

Forecaster::Scores Forecaster::score(const nn::Var<float>& entities, const nn::Var<float>& relations,
                                     std::span<const Quadruple> queries, const nn::Var<float>& candidates) const {
  if (queries.empty()) throw std::invalid_argument("no queries to score");
  std::vector<std::uint32_t> subjects, rels;
  for (const auto& q : queries) {
    subjects.push_back(q.s);
    rels.push_back(q.r);
  }
  const auto s = nn::gather_rows<float>(entities, subjects);
  const auto r = nn::gather_rows<float>(relations, rels);
  Scores out;
  out.base = nn::matmul_nt(nn::mul(s, r), candidates);
  out.total = out.base;
  if (!rhl_in_use()) return out;
  out.predicted = rhl_->predict_rows(r);
  out.rhl = rhl_->score_rows(s, rhl_->pattern_rows(r, out.predicted), candidates);
  out.total = gamma_ ? nn::add(out.base, nn::mul_scalar(out.rhl, entities.tape().param(*gamma_)))
                    : total_score(out.base, out.rhl, static_cast<float>(config_.gamma));
  return out;
}

nn::Var<float> Forecaster::encode_histories(nn::Tape<float>& tape, const SnapshotIndex& train,
                                            const nn::Var<float>& relations, std::span<const Quadruple> queries,
                                            Timestamp t) const {
  if (!rhl_) throw std::logic_error("history encoding needs the history learner");
  if (t == 0) throw std::invalid_argument("no history before the first timestamp");
  const auto dummy = tape.param(rhl_->dummy());
  nn::Var<float> keys;
  std::vector<std::vector<nn::RowRef<float>>> steps;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const auto& q = queries[qi];
    const auto history = train.pair_history(q.s, q.o, t, config_.max_history_len);
    if (steps.empty()) steps.resize(history.size());
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto& members = history.steps[i];
      if (members.empty()) {
        steps[i].push_back({dummy, 0});
      } else if (members.size() == 1) {
        steps[i].push_back({relations, members[0]});
      } else {
        if (!keys.valid()) keys = rhl_->keys(relations);
        const auto m = nn::gather_rows<float>(relations, members);
        steps[i].push_back({RelationHistoryLearner<float>::attend(m, nn::row(keys, q.r)), 0});
      }
    }
  }
  return rhl_->encode_histories(steps);
}

BatchLoss Forecaster::batch_loss(nn::Tape<float>& tape, const SnapshotIndex& train,
                                 std::span<const Quadruple> queries, Timestamp t,
                                 std::span<const std::uint32_t> candidates) const {
  if (queries.empty()) throw std::invalid_argument("empty batch");
  for (const auto& q : queries) {
    if (q.t != t) throw std::invalid_argument("batch queries must share one timestamp");
  }
  const auto rel = relation_embeddings(tape);
  const Timestamp from = t >= config_.window ? t - static_cast<Timestamp>(config_.window) : 0;
  const auto h = evolve(tape, train, rel, from, t);

  std::vector<std::uint32_t> targets;
  nn::Var<float> cand = h;
  if (candidates.empty()) {
    for (const auto& q : queries) targets.push_back(q.o);
  } else {
    cand = nn::gather_rows<float>(h, candidates);
    for (const auto& q : queries) {
      const auto it = std::find(candidates.begin(), candidates.end(), q.o);
      if (it == candidates.end()) throw std::invalid_argument("true object missing from the candidate set");
      targets.push_back(static_cast<std::uint32_t>(it - candidates.begin()));
    }
  }
  const auto sc = score(h, rel, queries, cand);
  BatchLoss out;
  out.tkgf = nn::cross_entropy_rows(sc.total, targets);
  if (rhl_in_use()) {
    if (t > 0) {
      out.hist = RelationHistoryLearner<float>::history_loss(sc.predicted,
                                                             encode_histories(tape, train, rel, queries, t));
    }
    if (config_.eta > 0.0) {
      const auto b = static_cast<RelationId>(base_relations());
      std::set<std::tuple<EntityId, RelationId, EntityId>> truth;
      if (t < train.num_timestamps()) {
        for (const auto& f : train.snapshot(t).facts) {
          truth.emplace(f.s, f.r, f.o);
          truth.emplace(f.o, f.r + b, f.s);
        }
      }
      const std::size_t n_cand = cand.shape()[0];
      std::vector<float> labels(queries.size() * n_cand, 0.0f);
      for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        for (std::size_t c = 0; c < n_cand; ++c) {
          const EntityId e = candidates.empty() ? static_cast<EntityId>(c) : candidates[c];
          if (truth.count({queries[qi].s, queries[qi].r, e})) labels[qi * n_cand + c] = 1.0f;
        }
      }
      out.rhl = nn::bce(nn::sigmoid(sc.rhl), std::span<const float>(labels));
    }
  }
  out.total = total_loss(out.tkgf, out.hist, out.rhl, static_cast<float>(config_.eta));
  return out;
}

nn::Tensor<float> Forecaster::evaluation_scores(const SnapshotSource& source,
                                                std::span<const Quadruple> queries) const {
  nn::Tape<float> tape(false);
  const auto rel = relation_embeddings(tape);
  const Timestamp from = first_eval_ >= config_.window ? first_eval_ - static_cast<Timestamp>(config_.window) : 0;
  const auto h = evolve(tape, source, rel, from, first_eval_);
  return score(h, rel, queries, h).total.value();
}

std::vector<Quadruple> with_reciprocal_queries(std::span<const Quadruple> facts, std::size_t base_relations) {
  std::vector<Quadruple> out(facts.begin(), facts.end());
  out.reserve(2 * facts.size());
  for (const auto& q : facts) out.push_back({q.o, q.r + static_cast<RelationId>(base_relations), q.s, q.t});
  return out;
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Forecaster& model) {
  std::string buf = "ZRCK";
  detail::put_u32(buf, kCheckpointVersion);
  detail::put_u64(buf, model.dataset_checksum());
  std::ostringstream config, texts;
  write_config(config, model.config());
  write_zrle(texts, model.texts());
  detail::put_str(buf, config.str());
  const auto zrle = texts.str();
  detail::put_u64(buf, zrle.size());
  buf += zrle;
  detail::put_u32(buf, static_cast<std::uint32_t>(model.params().count()));
  for (const auto& p : model.params()) {
    detail::put_str(buf, p->name);
    detail::put_u32(buf, static_cast<std::uint32_t>(p->value.rank()));
    for (const auto d : p->value.shape()) detail::put_u32(buf, static_cast<std::uint32_t>(d));
    for (const float v : p->value.storage()) detail::put_f32(buf, v);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  detail::ByteReader rd(std::string(std::istreambuf_iterator<char>(in), {}), "checkpoint");
  rd.need(4, "magic");
  if (rd.take(4) != "ZRCK") throw FormatError("not a checkpoint file (bad magic)");
  const auto version = rd.u32("version");
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.dataset_checksum = rd.u64("dataset checksum");
  {
    std::istringstream config{std::string(rd.str("config"))};
    try {
      ck.config = parse_config(config);
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("checkpoint config: ") + e.what());
    }
  }
  const auto zrle_size = rd.u64("text store size");
  rd.need(zrle_size, "text store");
  {
    std::istringstream texts{std::string(rd.take(zrle_size))};
    ck.texts = read_zrle(texts);
  }
  const auto n = rd.u32("tensor count");
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name(rd.str("tensor name"));
    const auto rank = rd.u32("tensor rank");
    if (rank > 3) throw FormatError("tensor " + name + " has rank " + std::to_string(rank));
    nn::Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(rd.u32("tensor shape"));
    const auto size = nn::shape_size(shape);
    if (size > rd.remaining() / 4) throw FormatError("checkpoint truncated in tensor " + name);
    std::vector<float> values(size);
    for (auto& v : values) v = rd.f32("tensor values");
    if (!ck.tensors.emplace(name, nn::Tensor<float>(std::move(shape), std::move(values))).second) {
      throw FormatError("duplicate tensor " + name);
    }
  }
  if (rd.remaining() != 0) throw FormatError("trailing bytes after checkpoint payload");
  return ck;
}

std::unique_ptr<Forecaster> restore(const TkgDataset& dataset, const Checkpoint& checkpoint) {
  if (dataset.checksum() != checkpoint.dataset_checksum) {
    throw DataError("checkpoint was trained on a different dataset (checksum mismatch)");
  }
  // Under random_frozen_rel_emb the stored texts are the control store; it
  // depends only on matrix shapes and the seed, so rebuilding reproduces it.
  auto model = std::make_unique<Forecaster>(dataset, checkpoint.texts, checkpoint.config);
  if (model->params().count() != checkpoint.tensors.size()) {
    throw DataError("checkpoint has " + std::to_string(checkpoint.tensors.size()) + " tensors, model has " +
                    std::to_string(model->params().count()));
  }
  for (auto& p : model->params()) {
    const auto it = checkpoint.tensors.find(p->name);
    if (it == checkpoint.tensors.end()) throw DataError("checkpoint lacks parameter " + p->name);
    if (it->second.shape() != p->value.shape()) {
      throw DataError("checkpoint parameter " + p->name + " has shape " + nn::shape_string(it->second.shape()) +
                      ", model expects " + nn::shape_string(p->value.shape()));
    }
    p->value = it->second;
  }
  return model;
}

}  // namespace zrforge
