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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "milcke/types.hpp"

namespace milcke {

// Bag aggregation variants. The byte values are the checkpoint tags.
enum class Variant : std::uint8_t {
  kAvg = 0,
  kOne = 1,
  kAtt = 2,
  kContrastiveAtt = 3,
};

std::string_view variant_name(Variant v);  // "avg", "one", "att", "cst-att"
std::optional<Variant> parse_variant(std::string_view name);

// Relation queries (one row per relation, used by ATT/CST-ATT attention),
// classifier embeddings (one row per relation) and per-relation bias.
struct ModelParams {
  Variant variant = Variant::kContrastiveAtt;
  Matrix query;       // R x d
  Matrix classifier;  // R x d
  Vector bias;        // R

  static ModelParams zeros(Variant variant, std::size_t relations, std::size_t dim);
  std::size_t relations() const { return static_cast<std::size_t>(classifier.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(classifier.cols()); }
  bool all_finite() const;
};

// Relation-aware forward pass of contrastive attention.
struct BagForward {
  Matrix representations;  // R x d, row i is the bag seen through query i
  Matrix attention;        // R x N, rows sum to 1
  Vector logits;           // R
};

// Numerically stable softmax and log-softmax (max subtracted).
Vector softmax(const Vector& scores);
Vector log_softmax(const Vector& scores);

// Mean of the instance rows.
Vector agg_avg(const Matrix& features);

struct InstanceSelection {
  Eigen::Index index = 0;
  Vector representation;
};

// Picks the instance with the highest relation-r logit; ties go to the
// smallest index.
InstanceSelection agg_one(const Matrix& features, const ModelParams& params, RelationId relation);

struct AttentionPool {
  Vector weights;  // N, sums to 1
  Vector representation;
};

// Softmax attention of the instances against a single query vector.
AttentionPool agg_att(const Matrix& features, const Vector& query);

// One attention-pooled representation and logit per relation.
BagForward agg_contrastive(const Matrix& features, const ModelParams& params);

// Per-relation inference logits for the params' variant. ONE and ATT
// enumerate every relation as the query; ATT and CST-ATT therefore share the
// same inference path and differ only in training.
Vector relation_logits(const ModelParams& params, const Matrix& features);

enum class ScoreMode : std::uint8_t {
  kProbability,  // softmax over relations (default)
  kLogit,        // raw relation logits
};

// Distribution over all R relations (including NA), or the raw logits.
Vector score_bag(const ModelParams& params, const Matrix& features,
                 ScoreMode mode = ScoreMode::kProbability);

// Per-instance evidence for one relation, in bag order: the pre-softmax
// attention score and normalized weight. AVG reports uniform weights; ONE
// reports instance logits with all weight on the selected instance.
struct InstanceEvidence {
  std::size_t position = 0;
  double score = 0;
  double weight = 0;
};
std::vector<InstanceEvidence> instance_evidence(const ModelParams& params, const Matrix& features,
                                                RelationId relation);

}  // namespace milcke
