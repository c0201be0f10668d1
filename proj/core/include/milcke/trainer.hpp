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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "milcke/aggregators.hpp"
#include "milcke/types.hpp"

namespace milcke {

// Hyperparameters. Defaults are the published large-scale settings; desk-scale
// runs override learning rate, warmup and epochs.
struct TrainingConfig {
  std::size_t bag_size = 50;
  double learning_rate = 7e-5;
  double warmup_start_lr = 7e-6;
  std::size_t warmup_steps = 1000;
  std::size_t batch_size = 60;  // bags
  double weight_decay = 0.01;
  std::size_t plateau_patience = 2;
  double decay_factor = 0.1;
  std::size_t max_plateaus = 3;
  std::size_t max_epochs = 18;
  std::uint64_t seed = 0;
  // Minimum absolute gain in (AUC + mAUC) / 2 that counts as improvement.
  double plateau_threshold = 1e-4;
  // Drop other golden relations of a multi-label bag from the softmax
  // denominator instead of keeping them as negatives.
  bool mask_sibling_positives = false;
  ScoreMode score_mode = ScoreMode::kProbability;

  // Throws ConfigError on invalid values.
  void validate() const;
};

// Same shape as ModelParams; used for gradients and optimizer moments.
struct ParamTensors {
  Matrix query;
  Matrix classifier;
  Vector bias;

  static ParamTensors zeros_like(const ModelParams& params);
  ParamTensors& operator+=(const ParamTensors& other);
  ParamTensors& operator*=(double s);
  bool all_finite() const;
};

double loss_ce(const Vector& logits, RelationId golden);

// InfoNCE over relation-aware bag representations: the denominator runs over
// every relation, each scored with its own representation.
double loss_infonce(const BagForward& forward, const ModelParams& params, RelationId golden);

struct LossGrad {
  double loss = 0;
  ParamTensors grad;
};

// Training loss of one (bag, golden relation) example for the params'
// variant, and its analytic gradient. Relations in `masked` are removed from
// the softmax denominator.
LossGrad example_loss_grad(const ModelParams& params, const Matrix& features, RelationId golden,
                           std::span<const RelationId> masked = {});
double example_loss(const ModelParams& params, const Matrix& features, RelationId golden,
                    std::span<const RelationId> masked = {});

struct TrainingExample {
  const Bag* bag = nullptr;
  RelationId golden = 0;
  std::vector<RelationId> masked;
};

// Mean loss and gradient over a batch. Per-example work may run on several
// threads; the reduction is always in example order. Throws NumericalError
// naming the first example with a non-finite loss or gradient.
LossGrad batch_gradient(const ModelParams& params, std::span<const TrainingExample> batch,
                        int epoch = 0, const EntityVocab* vocab = nullptr);

struct AdamWState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  std::uint64_t step = 0;
  ParamTensors first;
  ParamTensors second;

  static AdamWState zeros_like(const ModelParams& params);
};

// AdamW with bias correction and decoupled weight decay. Decay applies to the
// query and classifier matrices, not the bias.
void optimizer_step(ModelParams& params, const ParamTensors& grads, AdamWState& state, double lr,
                    double weight_decay);

// Linear warmup from warmup_start_lr to learning_rate over warmup_steps, then
// the base rate; both scaled by decay_factor^plateaus.
double lr_schedule(std::size_t step, std::size_t plateaus, const TrainingConfig& config);

// Counts plateaus of a maximized validation metric: `patience` consecutive
// epochs without improving on the best by more than `threshold`.
class PlateauTracker {
 public:
  PlateauTracker(std::size_t patience, double threshold) : patience_(patience), threshold_(threshold) {}

  // Returns true if this observation completes a plateau.
  bool observe(double metric);
  std::size_t plateaus() const { return plateaus_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  double threshold_;
  double best_ = -1e300;
  std::size_t stale_ = 0;
  std::size_t plateaus_ = 0;
};

// Q and C drawn i.i.d. N(0, 1/d), bias zero.
ModelParams init_params(Variant variant, std::size_t relations, std::size_t dim, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0;
  double val_auc = 0;
  double val_mauc = 0;
  double lr = 0;
  std::size_t plateaus = 0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_metric = 0;

  bool empty() const { return epochs.empty(); }
  void write_csv(const std::string& path) const;
};

struct TrainingResult {
  ModelParams params;  // best validation checkpoint
  AdamWState optimizer;
  TrainingHistory history;
};

// Expands bags into one example per golden relation (NA bags train towards NA).
std::vector<TrainingExample> expand_examples(const std::vector<Bag>& bags, bool mask_sibling_positives);

// Trains with per-epoch shuffling, batch-mean gradients, AdamW and the
// warmup/plateau schedule; keeps the checkpoint with the best validation
// (AUC + mAUC) / 2. Throws ConfigError for empty train or validation data.
TrainingResult train(const DatasetSplit& data, Variant variant, const TrainingConfig& config,
                     const KnowledgeSchema& schema);

// Learning rates and weight decays tried by grid_search_train. Each trial sets
// warmup_start_lr to a tenth of its learning rate.
struct HyperGrid {
  std::vector<double> learning_rates;
  std::vector<double> weight_decays;
};

struct GridTrial {
  double learning_rate = 0;
  double weight_decay = 0;
  double best_metric = 0;
};

struct GridSearchResult {
  TrainingResult best;
  TrainingConfig config;  // settings of the winning trial
  std::vector<GridTrial> trials;
};

// Trains one model per grid point and keeps the one with the highest
// validation (AUC + mAUC) / 2. Ties go to the earlier trial.
GridSearchResult grid_search_train(const DatasetSplit& data, Variant variant, const TrainingConfig& base,
                                   const HyperGrid& grid, const KnowledgeSchema& schema);

}  // namespace milcke
