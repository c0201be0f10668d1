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


#include "milcke/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "milcke/io.hpp"
#include "milcke/random.hpp"

namespace milcke {

namespace {

std::string indexed_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%02zu", prefix, i);
  return buf;
}

bool contains(const std::vector<RelationId>& v, RelationId r) {
  return std::find(v.begin(), v.end(), r) != v.end();
}

}  // namespace

void SynthConfig::validate() const {
  if (relations < 2) throw ConfigError("synthetic config needs at least 2 relations");
  if (entities < 2 || dim == 0 || bag_size == 0) throw ConfigError("synthetic counts must be positive");
  if (train_bags == 0 || validation_bags == 0 || test_bags == 0) {
    throw ConfigError("every synthetic split needs at least one bag");
  }
  if (!(informative_fraction > 0 && informative_fraction <= 1)) {
    throw ConfigError("informative_fraction must lie in (0, 1]");
  }
  if (!(noise_sigma >= 0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(na_fraction >= 0 && na_fraction < 1)) throw ConfigError("na_fraction must lie in [0, 1)");
  if (!(multi_label_rate >= 0 && multi_label_rate <= 1)) throw ConfigError("multi_label_rate must lie in [0, 1]");
  if (!(pair_offset_scale >= 0)) throw ConfigError("pair_offset_scale must be >= 0");
  const std::size_t pairs = entities * (entities - 1);
  if (train_bags + validation_bags + test_bags > pairs) {
    throw ConfigError("synthetic config requests more bags than the " + std::to_string(pairs) +
                      " available entity pairs");
  }
}

SyntheticDataset gen_synthetic(const SynthConfig& config) {
  config.validate();
  SyntheticDataset data;

  std::vector<std::string> rel_names{std::string(RelationSchema::kNaName)};
  for (std::size_t i = 0; i < config.relations; ++i) rel_names.push_back(indexed_name("rel", i));
  std::vector<std::string> ent_names;
  for (std::size_t i = 0; i < config.entities; ++i) ent_names.push_back(indexed_name("ent", i));
  data.schema = {EntityVocab(ent_names), RelationSchema(rel_names)};
  const RelationId na = data.schema.relations.na_id();
  const auto total_relations = static_cast<Eigen::Index>(rel_names.size());
  const auto d = static_cast<Eigen::Index>(config.dim);

  Rng rng = make_rng(config.seed, "synthgen");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix& protos = data.truth.prototypes;
  protos.resize(total_relations, d);
  for (Eigen::Index i = 0; i < total_relations; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) protos(i, j) = normal(rng);
    protos.row(i).normalize();
  }

  std::vector<EntityPair> pairs;
  for (std::size_t s = 0; s < config.entities; ++s) {
    for (std::size_t o = 0; o < config.entities; ++o) {
      if (s != o) pairs.push_back({static_cast<EntityId>(s), static_cast<EntityId>(o)});
    }
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  std::size_t next_pair = 0;

  std::vector<RelationId> positives;
  for (RelationId r = 0; r < total_relations; ++r) {
    if (r != na) positives.push_back(r);
  }
  auto pick = [&](const std::vector<RelationId>& from) {
    std::uniform_int_distribution<std::size_t> idx(0, from.size() - 1);
    return from[idx(rng)];
  };

  const std::size_t n = config.bag_size;
  const auto per_label = static_cast<std::size_t>(
      std::ceil(config.informative_fraction * static_cast<double>(n) - 1e-9));

  auto make_split = [&](std::size_t count, std::vector<Bag>& bags, std::vector<std::vector<RelationId>>& sources) {
    const auto na_count = static_cast<std::size_t>(std::floor(config.na_fraction * static_cast<double>(count) + 0.5));
    for (std::size_t b = 0; b < count; ++b) {
      Bag bag;
      bag.pair = pairs[next_pair++];
      const bool is_na = b < na_count;
      if (is_na) {
        bag.labels = {na};
      } else {
        bag.labels = {pick(positives)};
        if (unit(rng) < config.multi_label_rate) {
          std::vector<RelationId> rest;
          for (RelationId r : positives) {
            if (r != bag.labels.front()) rest.push_back(r);
          }
          bag.labels.push_back(pick(rest));
        }
        std::sort(bag.labels.begin(), bag.labels.end());
      }

      std::vector<RelationId> src;
      if (!is_na) {
        for (RelationId r : bag.labels) {
          for (std::size_t k = 0; k < per_label; ++k) src.push_back(r);
        }
        if (src.size() > n) {
          // Too many informative slots: share the bag round-robin.
          src.clear();
          for (std::size_t k = 0; k < n; ++k) src.push_back(bag.labels[k % bag.labels.size()]);
        }
      }
      std::vector<RelationId> distractors;
      for (RelationId r : positives) {
        if (!contains(bag.labels, r)) distractors.push_back(r);
      }
      while (src.size() < n) src.push_back(pick(distractors));
      std::shuffle(src.begin(), src.end(), rng);

      Vector offset(d);
      for (Eigen::Index j = 0; j < d; ++j) offset(j) = normal(rng);
      if (offset.norm() > 0) offset *= config.pair_offset_scale / offset.norm();

      bag.features.resize(static_cast<Eigen::Index>(n), d);
      for (std::size_t k = 0; k < n; ++k) {
        const auto row = static_cast<Eigen::Index>(k);
        bag.features.row(row) = protos.row(src[k]) + offset.transpose();
        for (Eigen::Index j = 0; j < d; ++j) bag.features(row, j) += config.noise_sigma * normal(rng);
      }
      bags.push_back(std::move(bag));
      sources.push_back(std::move(src));
    }
  };

  make_split(config.train_bags, data.split.train, data.truth.train_sources);
  make_split(config.validation_bags, data.split.validation, data.truth.validation_sources);
  make_split(config.test_bags, data.split.test, data.truth.test_sources);

  // Instance ids are unique across the whole dataset.
  std::size_t instance = 0;
  for (auto* part : {&data.split.train, &data.split.validation, &data.split.test}) {
    for (Bag& bag : *part) {
      for (std::size_t k = 0; k < n; ++k, ++instance) {
        const std::string id = std::to_string(instance);
        bag.instances.push_back({id, "img" + id});
      }
    }
  }

  data.split.train_facts = facts_of(data.split.train, data.schema.relations);
  data.split.validation_facts = facts_of(data.split.validation, data.schema.relations);
  data.split.test_facts = facts_of(data.split.test, data.schema.relations);
  return data;
}

double oracle_attention_quality(const ModelParams& params, const std::vector<Bag>& bags,
                                const std::vector<std::vector<RelationId>>& sources,
                                const RelationSchema& relations) {
  if (bags.size() != sources.size()) throw ConfigError("ground-truth sources do not match bags");
  double total = 0;
  std::size_t counted = 0;
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const Bag& bag = bags[b];
    if (bag.is_na(relations)) continue;
    double bag_ratio = 0;
    std::size_t labels_used = 0;
    for (RelationId g : bag.labels) {
      const Vector w = softmax(bag.features * params.query.row(g).transpose());
      double inf = 0, uninf = 0;
      std::size_t n_inf = 0, n_uninf = 0;
      for (std::size_t k = 0; k < bag.size(); ++k) {
        if (sources[b][k] == g) {
          inf += w(static_cast<Eigen::Index>(k));
          ++n_inf;
        } else {
          uninf += w(static_cast<Eigen::Index>(k));
          ++n_uninf;
        }
      }
      if (n_inf == 0 || n_uninf == 0) continue;
      bag_ratio += (inf / static_cast<double>(n_inf)) / std::max(uninf / static_cast<double>(n_uninf), 1e-12);
      ++labels_used;
    }
    if (labels_used == 0) continue;
    total += bag_ratio / static_cast<double>(labels_used);
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

TrainingConfig desk_scale_training_config(std::uint64_t seed) {
  TrainingConfig cfg;
  cfg.bag_size = 50;
  cfg.learning_rate = 1e-2;
  cfg.warmup_start_lr = 1e-3;
  cfg.warmup_steps = 20;
  cfg.batch_size = 16;
  cfg.weight_decay = 0.01;
  cfg.plateau_patience = 3;
  cfg.decay_factor = 0.1;
  cfg.max_plateaus = 3;
  cfg.max_epochs = 40;
  cfg.seed = seed;
  return cfg;
}

HyperGrid desk_scale_grid() { return {{0.01, 0.03}, {0.01, 0.1, 1.0}}; }

void write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticDataset& data,
                            std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  write_names(dir / "entities.txt", data.schema.entities.names());
  write_names(dir / "relations.txt", data.schema.relations.names());

  std::vector<Triplet> facts;
  for (const auto* part : {&data.split.train_facts, &data.split.validation_facts, &data.split.test_facts}) {
    facts.insert(facts.end(), part->begin(), part->end());
  }
  std::sort(facts.begin(), facts.end());
  write_triplets(dir / "triplets.tsv", facts, data.schema);

  Rng rng = make_rng(seed, "synth-boxes");
  std::uniform_real_distribution<double> pos(0.0, 200.0);
  std::uniform_real_distribution<double> size(20.0, 80.0);

  std::vector<InstanceRecord> records;
  std::vector<std::string> source_lines;
  Eigen::Index rows = 0;
  const std::vector<const std::vector<Bag>*> parts = {&data.split.train, &data.split.validation, &data.split.test};
  const std::vector<const std::vector<std::vector<RelationId>>*> sources = {
      &data.truth.train_sources, &data.truth.validation_sources, &data.truth.test_sources};
  for (const auto* part : parts) {
    for (const Bag& bag : *part) rows += bag.features.rows();
  }
  Matrix features(rows, static_cast<Eigen::Index>(data.truth.prototypes.cols()));
  Eigen::Index row = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (std::size_t b = 0; b < parts[p]->size(); ++b) {
      const Bag& bag = (*parts[p])[b];
      for (std::size_t k = 0; k < bag.size(); ++k, ++row) {
        features.row(row) = bag.features.row(static_cast<Eigen::Index>(k));
        InstanceRecord rec;
        rec.instance_id = bag.instances[k].instance_id;
        rec.image_id = bag.instances[k].image_id;
        rec.pair = bag.pair;
        rec.feature_row = static_cast<std::size_t>(row);
        rec.manifest_index = records.size();
        const double x = pos(rng), y = pos(rng), w = size(rng), h = size(rng);
        rec.subject_box = {x, y, x + w, y + h};
        const RelationId source = (*sources[p])[b][k];
        const bool informative = contains(bag.labels, source);
        source_lines.push_back(rec.instance_id + "\t" + data.schema.relations.name(source) + "\t" +
                               (informative ? "1" : "0"));
        if (informative) {
          // Shifted by less than the box extent, so the boxes overlap.
          rec.object_box = {x + w / 3, y + h / 3, x + w / 3 + size(rng), y + h / 3 + size(rng)};
        } else {
          const double ox = x + w + 10 + pos(rng);
          rec.object_box = {ox, y, ox + size(rng), y + size(rng)};
        }
        records.push_back(std::move(rec));
      }
    }
  }
  write_instance_manifest(dir / "manifest.jsonl", records, data.schema.entities);
  write_feature_file(dir / "features.milfeat", features);
  write_names(dir / "sources.tsv", source_lines);
}

}  // namespace milcke
