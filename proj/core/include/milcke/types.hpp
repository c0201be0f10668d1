/*
 * Copyright 2026 The milcke Authors.
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

#include <cstddef>
#include <cstdint>
#include <compare>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace milcke {

// Working precision is double throughout; features are stored on disk as
// float32 and promoted on load.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using EntityId = std::int32_t;
using RelationId = std::int32_t;

// ---------------------------------------------------------------------------
// Errors. Each carries enough context for the CLI to pick an exit code.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input (TSV, JSONL, schema files).
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what);
  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

// Malformed binary input (feature files, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or precondition violation on user-supplied values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class NumericalError : public Error {
 public:
  NumericalError(int epoch, std::string bag, const std::string& what);
  int epoch() const { return epoch_; }
  const std::string& bag() const { return bag_; }

 private:
  int epoch_;
  std::string bag_;
};

// ---------------------------------------------------------------------------
// Closed label sets.

class EntityVocab {
 public:
  EntityVocab() = default;
  explicit EntityVocab(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(EntityId id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::optional<EntityId> find(std::string_view name) const;
  // Throws ConfigError for unknown names.
  EntityId lookup(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, EntityId> index_;
};

// Relation labels including exactly one `NA` entry.
class RelationSchema {
 public:
  static constexpr std::string_view kNaName = "NA";

  RelationSchema() = default;
  explicit RelationSchema(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  RelationId na_id() const { return na_id_; }
  bool is_na(RelationId id) const { return id == na_id_; }
  const std::string& name(RelationId id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::optional<RelationId> find(std::string_view name) const;
  RelationId lookup(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, RelationId> index_;
  RelationId na_id_ = -1;
};

struct KnowledgeSchema {
  EntityVocab entities;
  RelationSchema relations;
};

struct EntityPair {
  EntityId subject = 0;
  EntityId object = 0;

  auto operator<=>(const EntityPair&) const = default;
};

struct Triplet {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;

  EntityPair pair() const { return {subject, object}; }
  auto operator<=>(const Triplet&) const = default;
};

struct TripletHash {
  std::size_t operator()(const Triplet& t) const noexcept;
};

struct EntityPairHash {
  std::size_t operator()(const EntityPair& p) const noexcept;
};

// Pixel-space box. Valid boxes have positive extent and finite, non-negative
// coordinates.
struct BoundingBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  bool valid() const;
  double area() const { return (x_max - x_min) * (y_max - y_min); }
  bool operator==(const BoundingBox&) const = default;
};

// One occurrence of an entity pair in one image. The feature vector lives in
// the feature file at `feature_row`.
struct InstanceRecord {
  std::string instance_id;
  std::string image_id;
  EntityPair pair;
  BoundingBox subject_box;
  BoundingBox object_box;
  std::size_t feature_row = 0;
  // Position in the instance manifest; the secondary tie-break key.
  std::size_t manifest_index = 0;
};

struct InstanceRef {
  std::string instance_id;
  std::string image_id;
};

// All instances selected for one entity pair, with its distant-supervision
// labels. `features` holds one row per instance, in bag order.
struct Bag {
  EntityPair pair;
  std::vector<InstanceRef> instances;
  std::vector<RelationId> labels;  // sorted, unique
  Matrix features;

  std::size_t size() const { return instances.size(); }
  bool is_na(const RelationSchema& schema) const;
};

struct DatasetSplit {
  std::vector<Bag> train;
  std::vector<Bag> validation;
  std::vector<Bag> test;

  // Positive (non-NA) facts carried by each split's bags, sorted.
  std::vector<Triplet> train_facts;
  std::vector<Triplet> validation_facts;
  std::vector<Triplet> test_facts;
};

// Collects the non-NA facts of a bag list, sorted and unique.
std::vector<Triplet> facts_of(const std::vector<Bag>& bags, const RelationSchema& schema);

// Throws ConfigError describing the first violated invariant. A bag_size of 0
// skips the upper bound on N.
void validate_bag(const Bag& bag, const RelationSchema& schema, std::size_t bag_size = 0);
void validate_split(const DatasetSplit& split, const RelationSchema& schema, std::size_t bag_size = 0);

std::string pair_label(const EntityPair& pair, const EntityVocab& vocab);

}  // namespace milcke
