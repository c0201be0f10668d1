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


#include "milcke/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace milcke {

ParseError::ParseError(std::string source, std::size_t line, const std::string& what)
    : Error(source + ":" + std::to_string(line) + ": " + what),
      source_(std::move(source)),
      line_(line) {}

NumericalError::NumericalError(int epoch, std::string bag, const std::string& what)
    : Error("epoch " + std::to_string(epoch) + ", bag " + bag + ": " + what),
      epoch_(epoch),
      bag_(std::move(bag)) {}

EntityVocab::EntityVocab(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ConfigError("entity vocabulary contains an empty name");
    auto [it, inserted] = index_.emplace(names_[i], static_cast<EntityId>(i));
    if (!inserted) throw ConfigError("duplicate entity name '" + names_[i] + "'");
  }
}

std::optional<EntityId> EntityVocab::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EntityId EntityVocab::lookup(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw ConfigError("unknown entity '" + std::string(name) + "'");
}

RelationSchema::RelationSchema(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw ConfigError("relation schema contains an empty name");
    auto [it, inserted] = index_.emplace(names_[i], static_cast<RelationId>(i));
    if (!inserted) throw ConfigError("duplicate relation name '" + names_[i] + "'");
    if (names_[i] == kNaName) na_id_ = static_cast<RelationId>(i);
  }
  if (na_id_ < 0) throw ConfigError("relation schema has no NA entry");
}

std::optional<RelationId> RelationSchema::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

RelationId RelationSchema::lookup(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw ConfigError("unknown relation '" + std::string(name) + "'");
}

std::size_t TripletHash::operator()(const Triplet& t) const noexcept {
  std::size_t h = std::hash<std::int64_t>{}(t.subject);
  h = h * 1000003u ^ std::hash<std::int64_t>{}(t.relation);
  h = h * 1000003u ^ std::hash<std::int64_t>{}(t.object);
  return h;
}

std::size_t EntityPairHash::operator()(const EntityPair& p) const noexcept {
  return std::hash<std::int64_t>{}((static_cast<std::int64_t>(p.subject) << 32) ^
                                   static_cast<std::uint32_t>(p.object));
}

bool BoundingBox::valid() const {
  for (double c : {x_min, y_min, x_max, y_max}) {
    if (!std::isfinite(c) || c < 0) return false;
  }
  return x_min < x_max && y_min < y_max;
}

bool Bag::is_na(const RelationSchema& schema) const {
  return labels.size() == 1 && schema.is_na(labels.front());
}

std::vector<Triplet> facts_of(const std::vector<Bag>& bags, const RelationSchema& schema) {
  std::vector<Triplet> facts;
  for (const Bag& bag : bags) {
    for (RelationId r : bag.labels) {
      if (!schema.is_na(r)) facts.push_back({bag.pair.subject, r, bag.pair.object});
    }
  }
  std::sort(facts.begin(), facts.end());
  facts.erase(std::unique(facts.begin(), facts.end()), facts.end());
  return facts;
}

void validate_bag(const Bag& bag, const RelationSchema& schema, std::size_t bag_size) {
  const std::size_t n = bag.instances.size();
  if (n == 0) throw ConfigError("bag has no instances");
  if (bag_size > 0 && n > bag_size) {
    throw ConfigError("bag has " + std::to_string(n) + " instances, more than bag size " +
                      std::to_string(bag_size));
  }
  if (static_cast<std::size_t>(bag.features.rows()) != n) {
    throw ConfigError("bag feature rows do not match instance count");
  }
  if (!bag.features.allFinite()) throw ConfigError("bag features contain non-finite values");
  if (bag.labels.empty()) throw ConfigError("bag has no labels");
  if (!std::is_sorted(bag.labels.begin(), bag.labels.end()) ||
      std::adjacent_find(bag.labels.begin(), bag.labels.end()) != bag.labels.end()) {
    throw ConfigError("bag labels must be sorted and unique");
  }
  bool has_na = false;
  for (RelationId r : bag.labels) {
    if (r < 0 || static_cast<std::size_t>(r) >= schema.size()) {
      throw ConfigError("bag label id " + std::to_string(r) + " outside schema");
    }
    has_na = has_na || schema.is_na(r);
  }
  if (has_na && bag.labels.size() > 1) throw ConfigError("bag mixes NA with a non-NA label");
}

void validate_split(const DatasetSplit& split, const RelationSchema& schema, std::size_t bag_size) {
  Eigen::Index dim = -1;
  std::set<EntityPair> seen_pairs;
  for (const auto* bags : {&split.train, &split.validation, &split.test}) {
    for (const Bag& bag : *bags) {
      validate_bag(bag, schema, bag_size);
      if (dim < 0) dim = bag.features.cols();
      if (bag.features.cols() != dim) throw ConfigError("inconsistent feature dimension across bags");
      if (!seen_pairs.insert(bag.pair).second) {
        throw ConfigError("entity pair appears in more than one bag");
      }
    }
  }
  auto disjoint = [](const std::vector<Triplet>& a, const std::vector<Triplet>& b) {
    std::vector<Triplet> sa(a), sb(b), common;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(common));
    return common.empty();
  };
  if (!disjoint(split.train_facts, split.validation_facts) ||
      !disjoint(split.train_facts, split.test_facts) ||
      !disjoint(split.validation_facts, split.test_facts)) {
    throw ConfigError("fact sets of the splits are not pairwise disjoint");
  }
}

std::string pair_label(const EntityPair& pair, const EntityVocab& vocab) {
  return vocab.name(pair.subject) + "|" + vocab.name(pair.object);
}

}  // namespace milcke
