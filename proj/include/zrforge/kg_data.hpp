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

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace zrforge {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using Timestamp = std::uint32_t;

struct Quadruple {
  EntityId s = 0;
  RelationId r = 0;
  EntityId o = 0;
  Timestamp t = 0;

  friend auto operator<=>(const Quadruple&, const Quadruple&) = default;
};

// Dense label <-> id map; ids are assigned in first-seen order.
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

inline constexpr std::string_view kInversePrefix = "Inversed ";

// Relation texts plus the reciprocal pairing and the seen/unseen partition.
// After reciprocals are added, ids [0, n) are the dataset relations and
// n + r is the reciprocal of r.
class RelationVocab {
 public:
  RelationVocab() = default;
  explicit RelationVocab(Vocabulary base);

  std::size_t size() const { return texts_.size(); }
  std::size_t base_count() const { return base_.size(); }
  bool has_reciprocals() const { return texts_.size() == 2 * base_.size() && !base_.labels().empty(); }
  const Vocabulary& base() const { return base_; }
  const std::string& text(RelationId r) const { return texts_.at(r); }

  // Throws std::logic_error when reciprocals are already present.
  void add_reciprocals();
  bool is_reciprocal(RelationId r) const { return has_reciprocals() && r >= base_count(); }
  // r^-1; only defined once reciprocals exist and only for dataset relations
  // and their reciprocals (the inverse of r^-1 is r itself).
  RelationId inverse(RelationId r) const;
  RelationId base_of(RelationId r) const { return is_reciprocal(r) ? r - static_cast<RelationId>(base_count()) : r; }

  // Marks dataset relations as unseen; reciprocals follow their base relation.
  void set_unseen(std::span<const RelationId> unseen_base);
  bool is_unseen(RelationId r) const { return unseen_.at(base_of(r)); }
  std::vector<RelationId> unseen_base() const;

  friend bool operator==(const RelationVocab& a, const RelationVocab& b) {
    return a.base_ == b.base_ && a.texts_ == b.texts_ && a.unseen_ == b.unseen_;
  }

 private:
  Vocabulary base_;
  std::vector<std::string> texts_;
  std::vector<bool> unseen_;
};

// Timeline of raw timestamp labels in chronological order; index = Timestamp.
class Timeline {
 public:
  Timeline() = default;
  explicit Timeline(std::vector<std::string> labels);
  std::size_t size() const { return labels_.size(); }
  const std::string& label(Timestamp t) const { return labels_.at(t); }
  std::optional<Timestamp> find(std::string_view label) const;
  // First index whose label is chronologically >= `label`.
  Timestamp lower_bound(std::string_view label) const;
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const Timeline& a, const Timeline& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
};

// Orders two raw timestamp labels: integers numerically, ISO dates
// lexicographically. Throws DataError for labels of neither kind.
bool timestamp_less(std::string_view a, std::string_view b);
bool is_timestamp_label(std::string_view label);

struct FactSet {
  Vocabulary entities;
  RelationVocab relations;
  Timeline timeline;
  std::vector<Quadruple> facts;

  friend bool operator==(const FactSet&, const FactSet&) = default;
};

// How labels are mapped while parsing.
struct VocabPolicy {
  // When set, labels must already exist in these vocabularies.
  const Vocabulary* entities = nullptr;
  const Vocabulary* relations = nullptr;
  const Timeline* timeline = nullptr;
};

// Reads `subject\trelation\tobject\ttimestamp` lines. Exact duplicates are
// dropped (first occurrence kept). Under the default policy vocabularies grow
// in first-seen order and timestamps are compressed to contiguous indices in
// chronological order.
FactSet parse_quadruples(std::istream& in, const VocabPolicy& policy = {});
FactSet read_quadruples(const std::filesystem::path& path, const VocabPolicy& policy = {});

void write_quadruples(std::ostream& out, std::span<const Quadruple> facts, const Vocabulary& entities,
                      const RelationVocab& relations, const Timeline& timeline);

// Object-prediction form of the subject query on `q`: (o, r^-1, s, t).
Quadruple reciprocal(const Quadruple& q, const RelationVocab& relations);

// Sidecars: `id\tlabel` per line.
void write_vocab_tsv(const std::filesystem::path& path, std::span<const std::string> labels);
std::vector<std::string> read_vocab_tsv(const std::filesystem::path& path);

struct TkgDataset {
  Vocabulary entities;
  RelationVocab relations;
  Timeline timeline;
  std::vector<Quadruple> train;
  std::vector<Quadruple> valid;
  std::vector<Quadruple> test;
  // First evaluation timestamp; training timestamps are [0, first_eval).
  Timestamp first_eval = 0;

  std::size_t num_entities() const { return entities.size(); }
  std::size_t num_relations() const { return relations.size(); }
  std::size_t num_timestamps() const { return timeline.size(); }
  Timestamp max_train_timestamp() const { return first_eval - 1; }

  // Throws DataError describing the first violated dataset invariant.
  void validate() const;
  // 64-bit content hash of vocabularies and facts.
  std::uint64_t checksum() const;

  friend bool operator==(const TkgDataset&, const TkgDataset&) = default;
};

void add_reciprocals(TkgDataset& dataset);

// Data directory layout: train/valid/test.tsv, entities.tsv, relations.tsv,
// timestamps.tsv, relations_zero.tsv and stats.json (first_eval lives there).
void save_dataset(const std::filesystem::path& dir, const TkgDataset& dataset);
TkgDataset load_dataset(const std::filesystem::path& dir);

}  // namespace zrforge
