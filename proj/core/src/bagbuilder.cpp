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


#include "milcke/bagbuilder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"
#include "milcke/geometry.hpp"
#include "milcke/random.hpp"

namespace milcke {

namespace {

using json = nlohmann::json;

bool tie_less(const InstanceRecord& a, const InstanceRecord& b) {
  if (a.image_id != b.image_id) return a.image_id < b.image_id;
  return a.manifest_index < b.manifest_index;
}

struct OverlapKey {
  double iou = 0;
  double distance = 0;
};

constexpr const char* kSplitNames[] = {"train", "validation", "test"};

}  // namespace

std::vector<InstanceRecord> rank_candidates(std::vector<InstanceRecord> candidates,
                                            const RankingStrategy& strategy) {
  if (candidates.empty()) throw ConfigError("rank_candidates: empty candidate list");

  if (const auto* random = std::get_if<RandomRanking>(&strategy)) {
    // Canonical order first so the shuffle does not depend on input order.
    std::sort(candidates.begin(), candidates.end(), tie_less);
    Rng rng(random->seed);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    return candidates;
  }

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);

  if (const auto* scored = std::get_if<ScoredRanking>(&strategy)) {
    std::vector<double> score(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      auto it = scored->scores.find(candidates[i].instance_id);
      if (it == scored->scores.end()) {
        throw ConfigError("score table has no entry for instance '" + candidates[i].instance_id + "'");
      }
      score[i] = it->second;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (score[a] != score[b]) return score[a] > score[b];
      return tie_less(candidates[a], candidates[b]);
    });
  } else {
    std::vector<OverlapKey> keys(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      keys[i].iou = iou(candidates[i].subject_box, candidates[i].object_box);
      keys[i].distance = centroid_distance(candidates[i].subject_box, candidates[i].object_box);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const bool oa = keys[a].iou > 0, ob = keys[b].iou > 0;
      if (oa != ob) return oa;
      if (oa) {
        if (keys[a].iou != keys[b].iou) return keys[a].iou > keys[b].iou;
      } else if (keys[a].distance != keys[b].distance) {
        return keys[a].distance < keys[b].distance;
      }
      return tie_less(candidates[a], candidates[b]);
    });
  }

  std::vector<InstanceRecord> ranked;
  ranked.reserve(candidates.size());
  for (std::size_t i : order) ranked.push_back(std::move(candidates[i]));
  return ranked;
}

BagBuildResult build_bags(const std::vector<Triplet>& triplets,
                          const std::vector<InstanceRecord>& instances, const Matrix& features,
                          std::size_t bag_size, const RankingStrategy& strategy,
                          const NaSamplingConfig& na_cfg, const RelationSchema& schema) {
  if (bag_size == 0) throw ConfigError("bag size must be at least 1");
  if (!(na_cfg.na_ratio >= 0) || !std::isfinite(na_cfg.na_ratio)) {
    throw ConfigError("na_ratio must be a finite non-negative number");
  }

  std::map<EntityPair, std::vector<std::size_t>> by_pair;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (instances[i].feature_row >= static_cast<std::size_t>(features.rows())) {
      throw ConfigError("instance '" + instances[i].instance_id + "' references feature row " +
                        std::to_string(instances[i].feature_row) + " beyond the feature file");
    }
    by_pair[instances[i].pair].push_back(i);
  }

  std::map<EntityPair, std::set<RelationId>> labels;
  for (const Triplet& t : triplets) {
    if (schema.is_na(t.relation)) continue;
    labels[t.pair()].insert(t.relation);
  }

  const RandomRanking* random = std::get_if<RandomRanking>(&strategy);
  std::uint64_t pair_counter = 0;

  auto make_bag = [&](const EntityPair& pair, std::vector<RelationId> bag_labels) {
    std::vector<InstanceRecord> candidates;
    for (std::size_t i : by_pair.at(pair)) candidates.push_back(instances[i]);
    std::vector<InstanceRecord> ranked;
    if (random != nullptr) {
      ranked = rank_candidates(std::move(candidates),
                               RandomRanking{derive_seed(random->seed, "bag-order", pair_counter)});
    } else {
      ranked = rank_candidates(std::move(candidates), strategy);
    }
    ++pair_counter;
    if (ranked.size() > bag_size) ranked.resize(bag_size);

    Bag bag;
    bag.pair = pair;
    bag.labels = std::move(bag_labels);
    bag.features.resize(static_cast<Eigen::Index>(ranked.size()), features.cols());
    for (std::size_t k = 0; k < ranked.size(); ++k) {
      bag.features.row(static_cast<Eigen::Index>(k)) =
          features.row(static_cast<Eigen::Index>(ranked[k].feature_row));
      bag.instances.push_back({ranked[k].instance_id, ranked[k].image_id});
    }
    return bag;
  };

  BagBuildResult result;
  for (const auto& [pair, rels] : labels) {
    if (!by_pair.contains(pair)) {
      result.skipped.push_back({pair, "no_instances"});
      continue;
    }
    result.bags.push_back(make_bag(pair, std::vector<RelationId>(rels.begin(), rels.end())));
  }

  std::vector<EntityPair> na_candidates;
  for (const auto& [pair, idx] : by_pair) {
    if (!labels.contains(pair)) na_candidates.push_back(pair);
  }
  const auto wanted = static_cast<std::size_t>(
      std::floor(na_cfg.na_ratio * static_cast<double>(result.bags.size()) + 0.5));
  const std::size_t take = std::min(wanted, na_candidates.size());
  if (take > 0) {
    Rng rng = make_rng(na_cfg.seed, "na-sampling");
    std::shuffle(na_candidates.begin(), na_candidates.end(), rng);
    na_candidates.resize(take);
    std::sort(na_candidates.begin(), na_candidates.end());
    for (const EntityPair& pair : na_candidates) {
      result.bags.push_back(make_bag(pair, {schema.na_id()}));
    }
    result.na_bags = take;
  }
  std::sort(result.bags.begin(), result.bags.end(),
            [](const Bag& a, const Bag& b) { return a.pair < b.pair; });
  return result;
}

DatasetSplit split_dataset(const std::vector<Bag>& bags, const SplitRatios& ratios,
                           std::uint64_t seed, const RelationSchema& schema) {
  for (double r : {ratios.train, ratios.validation, ratios.test}) {
    if (!(r > 0 && r < 1)) throw ConfigError("split ratios must lie strictly between 0 and 1");
  }
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }

  std::vector<std::size_t> positive, na;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    (bags[i].is_na(schema) ? na : positive).push_back(i);
  }

  DatasetSplit split;
  auto assign = [&](std::vector<std::size_t> idx, std::string_view stage) {
    Rng rng = make_rng(seed, stage);
    std::shuffle(idx.begin(), idx.end(), rng);
    const double n = static_cast<double>(idx.size());
    // Small epsilon so that e.g. 0.1 * 10 floors to 1, not 0.
    const auto n_valid = static_cast<std::size_t>(std::floor(ratios.validation * n + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * n + 1e-9));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const Bag& bag = bags[idx[k]];
      if (k < n_valid) {
        split.validation.push_back(bag);
      } else if (k < n_valid + n_test) {
        split.test.push_back(bag);
      } else {
        split.train.push_back(bag);
      }
    }
  };
  assign(positive, "split-positive");
  assign(na, "split-na");

  auto by_pair = [](const Bag& a, const Bag& b) { return a.pair < b.pair; };
  for (auto* part : {&split.train, &split.validation, &split.test}) {
    std::sort(part->begin(), part->end(), by_pair);
  }
  split.train_facts = facts_of(split.train, schema);
  split.validation_facts = facts_of(split.validation, schema);
  split.test_facts = facts_of(split.test, schema);
  return split;
}

void write_skipped_pairs(const std::filesystem::path& path, const std::vector<SkippedPair>& skipped,
                         const EntityVocab& vocab) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  for (const auto& s : skipped) {
    out << vocab.name(s.pair.subject) << '\t' << vocab.name(s.pair.object) << '\t' << s.reason << '\n';
  }
}

void write_bag_directory(const std::filesystem::path& dir, const KnowledgeSchema& schema,
                         const DatasetSplit& split, const std::vector<SkippedPair>& skipped) {
  std::filesystem::create_directories(dir);
  write_names(dir / "entities.txt", schema.entities.names());
  write_names(dir / "relations.txt", schema.relations.names());

  const std::vector<const std::vector<Bag>*> parts = {&split.train, &split.validation, &split.test};
  Eigen::Index total_rows = 0, dim = 0;
  for (const auto* part : parts) {
    for (const Bag& bag : *part) {
      total_rows += bag.features.rows();
      dim = bag.features.cols();
    }
  }
  if (total_rows == 0) throw ConfigError("no bags to write");

  Matrix all(total_rows, dim);
  std::ofstream out(dir / "bags.jsonl", std::ios::trunc);
  if (!out) throw ConfigError("cannot write bags.jsonl in '" + dir.string() + "'");
  Eigen::Index row = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (const Bag& bag : *parts[p]) {
      json labels = json::array();
      for (RelationId r : bag.labels) labels.push_back(schema.relations.name(r));
      json inst = json::array();
      for (std::size_t k = 0; k < bag.instances.size(); ++k) {
        all.row(row) = bag.features.row(static_cast<Eigen::Index>(k));
        inst.push_back({{"instance_id", bag.instances[k].instance_id},
                        {"image_id", bag.instances[k].image_id},
                        {"row", row}});
        ++row;
      }
      json j = {{"split", kSplitNames[p]},
                {"subject", schema.entities.name(bag.pair.subject)},
                {"object", schema.entities.name(bag.pair.object)},
                {"labels", labels},
                {"instances", inst}};
      out << j.dump() << '\n';
    }
  }
  out.close();
  write_feature_file(dir / "bag_features.milfeat", all);
  write_triplets(dir / "train_facts.tsv", split.train_facts, schema);
  write_triplets(dir / "validation_facts.tsv", split.validation_facts, schema);
  write_triplets(dir / "test_facts.tsv", split.test_facts, schema);
  write_skipped_pairs(dir / "skipped_pairs.tsv", skipped, schema.entities);
}

BagDirectory read_bag_directory(const std::filesystem::path& dir) {
  BagDirectory result;
  result.schema.entities = load_entity_vocab(dir / "entities.txt");
  result.schema.relations = load_relation_schema(dir / "relations.txt");
  const Matrix features = read_feature_file(dir / "bag_features.milfeat");
  const auto& schema = result.schema;

  const auto path = dir / "bags.jsonl";
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Bag bag;
    std::string split_name;
    try {
      const json j = json::parse(line);
      split_name = j.at("split").get<std::string>();
      auto s = schema.entities.find(j.at("subject").get<std::string>());
      auto o = schema.entities.find(j.at("object").get<std::string>());
      if (!s || !o) throw ParseError(path.string(), line_no, "unknown entity in bag");
      bag.pair = {*s, *o};
      for (const auto& l : j.at("labels")) {
        auto r = schema.relations.find(l.get<std::string>());
        if (!r) throw ParseError(path.string(), line_no, "unknown relation '" + l.get<std::string>() + "'");
        bag.labels.push_back(*r);
      }
      std::sort(bag.labels.begin(), bag.labels.end());
      const auto& inst = j.at("instances");
      bag.features.resize(static_cast<Eigen::Index>(inst.size()), features.cols());
      Eigen::Index k = 0;
      for (const auto& item : inst) {
        const auto row = item.at("row").get<std::int64_t>();
        if (row < 0 || row >= features.rows()) {
          throw ParseError(path.string(), line_no, "instance row out of range");
        }
        bag.features.row(k++) = features.row(row);
        bag.instances.push_back(
            {item.at("instance_id").get<std::string>(), item.at("image_id").get<std::string>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    try {
      validate_bag(bag, schema.relations);
    } catch (const ConfigError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
    if (split_name == "train") {
      result.split.train.push_back(std::move(bag));
    } else if (split_name == "validation") {
      result.split.validation.push_back(std::move(bag));
    } else if (split_name == "test") {
      result.split.test.push_back(std::move(bag));
    } else {
      throw ParseError(path.string(), line_no, "unknown split '" + split_name + "'");
    }
  }
  result.split.train_facts = facts_of(result.split.train, schema.relations);
  result.split.validation_facts = facts_of(result.split.validation, schema.relations);
  result.split.test_facts = facts_of(result.split.test, schema.relations);
  return result;
}

}  // namespace milcke
