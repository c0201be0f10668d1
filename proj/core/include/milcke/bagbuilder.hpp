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
#include <string>
#include <variant>
#include <vector>

#include "milcke/io.hpp"
#include "milcke/types.hpp"

namespace milcke {

// Candidate ordering strategies for filling a bag.
struct OverlapRanking {};
struct RandomRanking {
  std::uint64_t seed = 0;
};
struct ScoredRanking {
  ScoreTable scores;  // instance id -> score, higher first
};
using RankingStrategy = std::variant<OverlapRanking, RandomRanking, ScoredRanking>;

struct NaSamplingConfig {
  double na_ratio = 0.5;  // NA bags per positive bag
  std::uint64_t seed = 0;
};

// Orders candidate instances of one entity pair.
//   Overlap: IoU > 0 first by descending IoU, then the rest by ascending
//            centroid distance.
//   Random:  uniform shuffle driven by the seed.
//   Scored:  descending external score.
// Ties fall back to (image_id, manifest_index). Throws ConfigError if a Scored
// table lacks a candidate, or if `candidates` is empty.
std::vector<InstanceRecord> rank_candidates(std::vector<InstanceRecord> candidates,
                                            const RankingStrategy& strategy);

struct SkippedPair {
  EntityPair pair;
  std::string reason;
};

struct BagBuildResult {
  std::vector<Bag> bags;  // sorted by (subject id, object id)
  std::vector<SkippedPair> skipped;
  std::size_t na_bags = 0;
};

// Aligns KB facts to instances: one bag per entity pair carrying every KB
// relation of that pair, filled with the top `bag_size` ranked instances.
// NA bags are sampled from relation-free pairs that have instances.
BagBuildResult build_bags(const std::vector<Triplet>& triplets,
                          const std::vector<InstanceRecord>& instances, const Matrix& features,
                          std::size_t bag_size, const RankingStrategy& strategy,
                          const NaSamplingConfig& na_cfg, const RelationSchema& schema);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

// Splits bags by entity pair. Validation and test get floor(ratio * n) bags,
// train takes the remainder; positive and NA bags are split separately.
DatasetSplit split_dataset(const std::vector<Bag>& bags, const SplitRatios& ratios,
                           std::uint64_t seed, const RelationSchema& schema);

// A bag directory holds everything downstream stages need:
//   entities.txt, relations.txt      schema files
//   bags.jsonl                       one bag per line, tagged with its split
//   bag_features.milfeat             instance features in bag order
//   {train,validation,test}_facts.tsv
//   skipped_pairs.tsv                subject<TAB>object<TAB>reason
struct BagDirectory {
  KnowledgeSchema schema;
  DatasetSplit split;
};

void write_bag_directory(const std::filesystem::path& dir, const KnowledgeSchema& schema,
                         const DatasetSplit& split, const std::vector<SkippedPair>& skipped);
BagDirectory read_bag_directory(const std::filesystem::path& dir);

void write_skipped_pairs(const std::filesystem::path& path, const std::vector<SkippedPair>& skipped,
                         const EntityVocab& vocab);

}  // namespace milcke
