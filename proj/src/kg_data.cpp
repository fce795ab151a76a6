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


#include "zrforge/kg_data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "zrforge/error.hpp"
#include "zrforge/rng.hpp"

namespace zrforge {

std::uint32_t Vocabulary::intern(std::string_view label) {
  const auto it = index_.find(std::string(label));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.emplace_back(label);
  index_.emplace(labels_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view label) const {
  const auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

RelationVocab::RelationVocab(Vocabulary base)
    : base_(std::move(base)), texts_(base_.labels()), unseen_(base_.size(), false) {}

void RelationVocab::add_reciprocals() {
  if (has_reciprocals()) throw std::logic_error("reciprocal relations already present");
  const std::size_t n = base_.size();
  for (std::size_t r = 0; r < n; ++r) texts_.push_back(std::string(kInversePrefix) + base_.label(static_cast<std::uint32_t>(r)));
}

RelationId RelationVocab::inverse(RelationId r) const {
  if (!has_reciprocals()) throw std::logic_error("relation vocabulary has no reciprocals");
  const auto n = static_cast<RelationId>(base_count());
  if (r >= 2 * n) throw std::out_of_range("relation id out of range");
  return r < n ? r + n : r - n;
}

void RelationVocab::set_unseen(std::span<const RelationId> unseen_base) {
  std::fill(unseen_.begin(), unseen_.end(), false);
  for (const RelationId r : unseen_base) unseen_.at(r) = true;
}

std::vector<RelationId> RelationVocab::unseen_base() const {
  std::vector<RelationId> out;
  for (std::size_t r = 0; r < unseen_.size(); ++r) {
    if (unseen_[r]) out.push_back(static_cast<RelationId>(r));
  }
  return out;
}

namespace {

enum class LabelKind { kInteger, kDate, kInvalid };

LabelKind classify(std::string_view s) {
  if (s.empty()) return LabelKind::kInvalid;
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i < s.size() && std::all_of(s.begin() + i, s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return LabelKind::kInteger;
  }
  // YYYY-MM-DD
  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    for (std::size_t k : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
      if (s[k] < '0' || s[k] > '9') return LabelKind::kInvalid;
    }
    const int month = (s[5] - '0') * 10 + (s[6] - '0');
    const int day = (s[8] - '0') * 10 + (s[9] - '0');
    if (month >= 1 && month <= 12 && day >= 1 && day <= 31) return LabelKind::kDate;
  }
  return LabelKind::kInvalid;
}

long long to_integer(std::string_view s) {
  long long v = 0;
  const char* first = s.data() + (s[0] == '+' ? 1 : 0);
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("timestamp out of range: " + std::string(s));
  return v;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

bool is_timestamp_label(std::string_view label) { return classify(label) != LabelKind::kInvalid; }

bool timestamp_less(std::string_view a, std::string_view b) {
  const LabelKind ka = classify(a), kb = classify(b);
  if (ka == LabelKind::kInvalid) throw DataError("unmappable timestamp '" + std::string(a) + "'");
  if (kb == LabelKind::kInvalid) throw DataError("unmappable timestamp '" + std::string(b) + "'");
  if (ka != kb) throw DataError("mixed timestamp kinds: '" + std::string(a) + "' and '" + std::string(b) + "'");
  if (ka == LabelKind::kInteger) return to_integer(a) < to_integer(b);
  return a < b;
}

Timeline::Timeline(std::vector<std::string> labels) : labels_(std::move(labels)) {
  for (std::size_t i = 1; i < labels_.size(); ++i) {
    if (!timestamp_less(labels_[i - 1], labels_[i])) {
      throw DataError("timeline not strictly increasing at index " + std::to_string(i));
    }
  }
}

std::optional<Timestamp> Timeline::find(std::string_view label) const {
  const Timestamp t = lower_bound(label);
  if (t < labels_.size() && labels_[t] == label) return t;
  return std::nullopt;
}

Timestamp Timeline::lower_bound(std::string_view label) const {
  const auto it = std::lower_bound(labels_.begin(), labels_.end(), label,
                                   [](const std::string& a, std::string_view b) { return timestamp_less(a, b); });
  return static_cast<Timestamp>(it - labels_.begin());
}

FactSet parse_quadruples(std::istream& in, const VocabPolicy& policy) {
  struct RawFact {
    EntityId s;
    RelationId r;
    EntityId o;
    std::size_t time_label;
  };
  FactSet out;
  Vocabulary relations;
  if (policy.entities) out.entities = *policy.entities;
  if (policy.relations) relations = *policy.relations;

  std::vector<std::string> time_labels;
  std::unordered_map<std::string, std::size_t> time_index;
  std::optional<LabelKind> kind;
  std::vector<RawFact> raw;

  auto lookup = [](const Vocabulary* fixed, Vocabulary& grow, std::string_view label, std::size_t line,
                   const char* what) -> std::uint32_t {
    if (!fixed) return grow.intern(label);
    const auto id = fixed->find(label);
    if (!id) throw ParseError(line, std::string("unknown ") + what + " '" + std::string(label) + "'");
    return *id;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected 4 tab-separated fields, got " + std::to_string(fields.size()));
    }
    const LabelKind k = classify(fields[3]);
    if (k == LabelKind::kInvalid) throw ParseError(line_no, "unmappable timestamp '" + std::string(fields[3]) + "'");
    if (kind && *kind != k) throw ParseError(line_no, "timestamp kind differs from earlier lines");
    kind = k;
    RawFact f{};
    f.s = lookup(policy.entities, out.entities, fields[0], line_no, "entity");
    f.r = lookup(policy.relations, relations, fields[1], line_no, "relation");
    f.o = lookup(policy.entities, out.entities, fields[2], line_no, "entity");
    const std::string tl(fields[3]);
    if (policy.timeline && !policy.timeline->find(tl)) {
      throw ParseError(line_no, "timestamp '" + tl + "' not in timeline");
    }
    auto [it, inserted] = time_index.emplace(tl, time_labels.size());
    if (inserted) time_labels.push_back(tl);
    f.time_label = it->second;
    raw.push_back(f);
  }

  std::vector<Timestamp> label_to_t(time_labels.size());
  if (policy.timeline) {
    out.timeline = *policy.timeline;
    for (std::size_t i = 0; i < time_labels.size(); ++i) label_to_t[i] = *out.timeline.find(time_labels[i]);
  } else {
    std::vector<std::size_t> order(time_labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return timestamp_less(time_labels[a], time_labels[b]); });
    std::vector<std::string> sorted;
    sorted.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::string& label = time_labels[order[i]];
      if (!sorted.empty() && !timestamp_less(sorted.back(), label)) {
        throw DataError("timestamps '" + sorted.back() + "' and '" + label + "' denote the same time");
      }
      sorted.push_back(label);
      label_to_t[order[i]] = static_cast<Timestamp>(i);
    }
    out.timeline = Timeline(std::move(sorted));
  }

  std::set<Quadruple> seen;
  out.facts.reserve(raw.size());
  for (const auto& f : raw) {
    const Quadruple q{f.s, f.r, f.o, label_to_t[f.time_label]};
    if (seen.insert(q).second) out.facts.push_back(q);
  }
  out.relations = RelationVocab(std::move(relations));
  return out;
}

FactSet read_quadruples(const std::filesystem::path& path, const VocabPolicy& policy) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return parse_quadruples(in, policy);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

void write_quadruples(std::ostream& out, std::span<const Quadruple> facts, const Vocabulary& entities,
                      const RelationVocab& relations, const Timeline& timeline) {
  for (const auto& q : facts) {
    out << entities.label(q.s) << '\t' << relations.text(q.r) << '\t' << entities.label(q.o) << '\t'
        << timeline.label(q.t) << '\n';
  }
}

Quadruple reciprocal(const Quadruple& q, const RelationVocab& relations) {
  return Quadruple{q.o, relations.inverse(q.r), q.s, q.t};
}

void write_vocab_tsv(const std::filesystem::path& path, std::span<const std::string> labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << '\t' << labels[i] << '\n';
}

std::vector<std::string> read_vocab_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(line_no, path.string() + ": expected id<TAB>label");
    std::size_t id = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + tab, id);
    if (ec != std::errc() || ptr != line.data() + tab || id != labels.size()) {
      throw ParseError(line_no, path.string() + ": ids must be contiguous from 0");
    }
    labels.push_back(line.substr(tab + 1));
  }
  return labels;
}

void TkgDataset::validate() const {
  auto check_fact = [&](const Quadruple& q, const char* split) {
    if (q.s >= entities.size() || q.o >= entities.size() || q.r >= relations.size() || q.t >= timeline.size()) {
      throw DataError(std::string(split) + " fact has an id outside the vocabularies");
    }
  };
  std::vector<bool> train_entity(entities.size(), false);
  for (const auto& q : train) {
    check_fact(q, "train");
    if (q.t >= first_eval) throw DataError("train fact at or after the first evaluation timestamp");
    if (relations.is_unseen(q.r)) throw DataError("train fact carries unseen relation '" + relations.text(q.r) + "'");
    train_entity[q.s] = train_entity[q.o] = true;
  }
  for (const auto* split : {&valid, &test}) {
    const char* name = split == &valid ? "valid" : "test";
    for (const auto& q : *split) {
      check_fact(q, name);
      if (q.t < first_eval) throw DataError(std::string(name) + " fact before the first evaluation timestamp");
      if (!train_entity[q.s] || !train_entity[q.o]) {
        throw DataError(std::string(name) + " fact has an entity absent from train");
      }
    }
  }
  if (relations.has_reciprocals()) {
    for (const auto r : relations.unseen_base()) {
      if (!relations.is_unseen(relations.inverse(r))) throw DataError("reciprocal seen status differs");
    }
  }
}

std::uint64_t TkgDataset::checksum() const {
  std::uint64_t h = fnv1a64("zrforge-dataset");
  auto mix_str = [&](std::string_view s) { h = fnv1a64(s, h ^ 0xff); };
  for (const auto& l : entities.labels()) mix_str(l);
  for (RelationId r = 0; r < relations.size(); ++r) mix_str(relations.text(r));
  for (const auto r : relations.unseen_base()) h = mix64(h ^ r);
  for (const auto& l : timeline.labels()) mix_str(l);
  for (const auto* split : {&train, &valid, &test}) {
    h = mix64(h ^ split->size());
    for (const auto& q : *split) {
      h = mix64(h ^ (std::uint64_t{q.s} << 32 | q.o));
      h = mix64(h ^ (std::uint64_t{q.r} << 32 | q.t));
    }
  }
  return mix64(h ^ first_eval);
}

void add_reciprocals(TkgDataset& dataset) { dataset.relations.add_reciprocals(); }

namespace {

void write_facts(const std::filesystem::path& path, const TkgDataset& d, std::span<const Quadruple> facts) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_quadruples(out, facts, d.entities, d.relations, d.timeline);
}

}  // namespace

void save_dataset(const std::filesystem::path& dir, const TkgDataset& dataset) {
  if (dataset.relations.has_reciprocals()) throw std::logic_error("save_dataset expects base relations only");
  std::filesystem::create_directories(dir);
  write_facts(dir / "train.tsv", dataset, dataset.train);
  write_facts(dir / "valid.tsv", dataset, dataset.valid);
  write_facts(dir / "test.tsv", dataset, dataset.test);
  write_vocab_tsv(dir / "entities.tsv", dataset.entities.labels());
  write_vocab_tsv(dir / "relations.tsv", dataset.relations.base().labels());
  write_vocab_tsv(dir / "timestamps.tsv", dataset.timeline.labels());
  {
    std::ofstream out(dir / "relations_zero.tsv");
    for (const auto r : dataset.relations.unseen_base()) out << r << '\t' << dataset.relations.text(r) << '\n';
  }
  std::size_t unseen = dataset.relations.unseen_base().size();
  nlohmann::ordered_json stats;
  stats["num_entities"] = dataset.num_entities();
  stats["num_relations"] = dataset.relations.base_count();
  stats["num_train_timestamps"] = dataset.first_eval;
  stats["num_eval_timestamps"] = dataset.num_timestamps() - dataset.first_eval;
  stats["num_seen_relations"] = dataset.relations.base_count() - unseen;
  stats["num_unseen_relations"] = unseen;
  stats["num_train_facts"] = dataset.train.size();
  stats["num_valid_facts"] = dataset.valid.size();
  stats["num_test_facts"] = dataset.test.size();
  stats["first_eval_timestamp"] = dataset.first_eval;
  stats["first_eval_label"] = dataset.timeline.label(dataset.first_eval);
  std::ofstream(dir / "stats.json") << stats.dump(2) << '\n';
}

TkgDataset load_dataset(const std::filesystem::path& dir) {
  TkgDataset d;
  Vocabulary entities, relations;
  for (const auto& l : read_vocab_tsv(dir / "entities.tsv")) entities.intern(l);
  for (const auto& l : read_vocab_tsv(dir / "relations.tsv")) relations.intern(l);
  Timeline timeline(read_vocab_tsv(dir / "timestamps.tsv"));
  const VocabPolicy fixed{&entities, &relations, &timeline};
  d.train = read_quadruples(dir / "train.tsv", fixed).facts;
  d.valid = read_quadruples(dir / "valid.tsv", fixed).facts;
  d.test = read_quadruples(dir / "test.tsv", fixed).facts;
  d.entities = std::move(entities);
  d.relations = RelationVocab(std::move(relations));
  d.timeline = std::move(timeline);

  std::vector<RelationId> unseen;
  {
    std::ifstream in(dir / "relations_zero.tsv");
    if (!in) throw DataError("missing " + (dir / "relations_zero.tsv").string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      const std::string label = tab == std::string::npos ? line : line.substr(tab + 1);
      const auto r = d.relations.base().find(label);
      if (!r) throw DataError("relations_zero.tsv names unknown relation '" + label + "'");
      unseen.push_back(*r);
    }
  }
  d.relations.set_unseen(unseen);

  std::ifstream stats_in(dir / "stats.json");
  if (!stats_in) throw DataError("missing " + (dir / "stats.json").string());
  try {
    const auto stats = nlohmann::json::parse(stats_in);
    d.first_eval = stats.at("first_eval_timestamp").get<Timestamp>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("stats.json: " + std::string(e.what()));
  }
  d.validate();
  return d;
}

}  // namespace zrforge
