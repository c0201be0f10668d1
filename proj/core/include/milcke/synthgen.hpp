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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "milcke/aggregators.hpp"
#include "milcke/trainer.hpp"
#include "milcke/types.hpp"

namespace milcke {

// Synthetic distant-supervision benchmark. Each positive bag holds
// ceil(informative_fraction * bag_size) instances per golden relation built
// from that relation's prototype; the remaining instances are distractors
// built from other relations' prototypes. Every instance also carries a small
// per-pair offset and Gaussian noise.
struct SynthConfig {
  std::size_t relations = 10;  // excluding NA
  std::size_t entities = 60;
  std::size_t dim = 16;
  std::size_t train_bags = 2000;
  std::size_t validation_bags = 400;
  std::size_t test_bags = 600;
  std::size_t bag_size = 50;
  double informative_fraction = 0.3;
  double noise_sigma = 0.5;
  double na_fraction = 0.25;         // share of each split's bags labeled NA
  double multi_label_rate = 0.1;     // chance a positive pair gets a second relation
  double pair_offset_scale = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GroundTruth {
  Matrix prototypes;  // R x d, unit rows; the NA row is unused
  // Source relation of every instance, parallel to each split's bags. An
  // instance is informative for a bag iff its source is one of the labels.
  std::vector<std::vector<RelationId>> train_sources;
  std::vector<std::vector<RelationId>> validation_sources;
  std::vector<std::vector<RelationId>> test_sources;
};

struct SyntheticDataset {
  KnowledgeSchema schema;  // relations: NA followed by rel00.., entities ent00..
  DatasetSplit split;
  GroundTruth truth;
};

SyntheticDataset gen_synthetic(const SynthConfig& config);

// Mean over positive bags of (average golden-relation attention on
// informative instances) / (average on uninformative ones, floored at 1e-12).
// Bags without uninformative instances are skipped. Returns 0 if no bag
// qualifies.
double oracle_attention_quality(const ModelParams& params, const std::vector<Bag>& bags,
                                const std::vector<std::vector<RelationId>>& sources,
                                const RelationSchema& relations);

// Training settings sized for the synthetic benchmark.
TrainingConfig desk_scale_training_config(std::uint64_t seed = 0);

// Learning rates {0.01, 0.03} x weight decays {0.01, 0.1, 1}.
HyperGrid desk_scale_grid();

// Writes the dataset as raw pipeline inputs: entities.txt, relations.txt,
// triplets.tsv (all positive facts), manifest.jsonl and features.milfeat.
// Informative instances get overlapping subject/object boxes, distractors
// disjoint ones. sources.tsv records `instance_id<TAB>source relation<TAB>1|0`,
// the last column marking informative instances.
void write_synthetic_corpus(const std::filesystem::path& dir, const SyntheticDataset& data,
                            std::uint64_t seed);

}  // namespace milcke
