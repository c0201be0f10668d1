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


#include <gtest/gtest.h>

#include <cmath>
#include <array>
#include <fstream>

#include "generators.hpp"
#include "milcke/synthgen.hpp"
#include "milcke/trainer.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

namespace milcke {
namespace {

using testing::Gen;

TEST(Loss, CrossEntropyReferenceValue) {
  Vector logits(3);
  logits << 1, 2, 3;
  EXPECT_NEAR(loss_ce(logits, 2), 0.40760596444438, 1e-12);
  EXPECT_NEAR(loss_ce(logits, 0), 2.40760596444438, 1e-12);
}

TEST(Loss, UniformInfoNceIsLogR) {
  for (std::size_t r : {2u, 5u, 51u}) {
    const ModelParams p = ModelParams::zeros(Variant::kContrastiveAtt, r, 4);
    const Matrix v = Matrix::Random(3, 4);
    const BagForward f = agg_contrastive(v, p);
    EXPECT_NEAR(loss_infonce(f, p, 1), std::log(double(r)), 1e-9);
  }
}

TEST(Loss, ExampleLossMatchesReference) {
  Gen g(21);
  for (Variant var : {Variant::kAvg, Variant::kOne, Variant::kAtt, Variant::kContrastiveAtt}) {
    for (int t = 0; t < 25; ++t) {
      const auto r = std::size_t(g.integer(2, 6));
      const ModelParams p = g.params(var, r, std::size_t(g.integer(1, 8)));
      const Matrix v = g.matrix(g.integer(1, 5), Eigen::Index(p.dim()));
      const auto golden = RelationId(g.integer(0, int(r) - 1));
      EXPECT_NEAR(example_loss(p, v, golden), oracle::bag_loss(p, v, golden), 1e-12);
      std::vector<RelationId> masked{RelationId((golden + 1) % RelationId(r))};
      EXPECT_NEAR(example_loss(p, v, golden, masked), oracle::bag_loss(p, v, golden, masked), 1e-12);
      EXPECT_LE(example_loss(p, v, golden, masked), example_loss(p, v, golden) + 1e-15);
      EXPECT_NEAR(example_loss_grad(p, v, golden).loss, example_loss(p, v, golden), 1e-12);
    }
  }
}

TEST(Gradients, AgreeWithFiniteDifferences) {
  Gen g(22);
  for (Variant var : {Variant::kAvg, Variant::kOne, Variant::kAtt, Variant::kContrastiveAtt}) {
    for (int t = 0; t < 20; ++t) {
      const auto r = std::size_t(g.integer(2, 6));
      const auto d = g.integer(1, 8);
      const ModelParams p = g.params(var, r, std::size_t(d));
      std::vector<Bag> bags(std::size_t(g.integer(1, 3)));
      std::vector<TrainingExample> batch;
      for (auto& b : bags) {
        b.features = g.matrix(g.integer(1, 5), d);
        batch.push_back({&b, RelationId(g.integer(0, int(r) - 1)), {}});
      }
      const auto check = oracle::finite_difference(p, batch);
      EXPECT_LT(check.max_rel_error, 1e-4) << variant_name(var) << " case " << t;
    }
  }
}

TEST(Gradients, OneSendsNothingToQueries) {
  Gen g(23);
  const ModelParams p = g.params(Variant::kOne, 3, 4);
  const auto lg = example_loss_grad(p, g.matrix(5, 4), 1);
  EXPECT_EQ(lg.grad.query.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, AttOnlyTouchesTheGoldenQuery) {
  Gen g(24);
  const ModelParams p = g.params(Variant::kAtt, 4, 3);
  const auto lg = example_loss_grad(p, g.matrix(5, 3), 2);
  for (Eigen::Index i = 0; i < 4; ++i) {
    if (i != 2) {
      EXPECT_EQ(lg.grad.query.row(i).cwiseAbs().maxCoeff(), 0.0);
    }
  }
  EXPECT_GT(lg.grad.query.row(2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(BatchGradient, NamesTheBagWithNonFiniteValues) {
  const ModelParams p = ModelParams::zeros(Variant::kAvg, 2, 2);
  Bag ok, bad;
  ok.pair = {0, 1};
  ok.features = Matrix::Ones(2, 2);
  bad.pair = {1, 0};
  bad.features = Matrix::Ones(2, 2);
  bad.features(0, 0) = std::nan("");
  const EntityVocab vocab({"cat", "mat"});
  std::vector<TrainingExample> batch{{&ok, 1, {}}, {&bad, 1, {}}};
  try {
    batch_gradient(p, batch, 4, &vocab);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.epoch(), 4);
    EXPECT_EQ(e.bag(), "mat|cat");
  }
}

TEST(BatchGradient, IsTheMeanOfExampleGradients) {
  Gen g(25);
  const ModelParams p = g.params(Variant::kContrastiveAtt, 3, 2);
  std::vector<Bag> bags(40);
  std::vector<TrainingExample> batch;
  for (auto& b : bags) {
    b.features = g.matrix(3, 2);
    batch.push_back({&b, RelationId(g.integer(0, 2)), {}});
  }
  const LossGrad total = batch_gradient(p, batch);
  Matrix q = Matrix::Zero(3, 2);
  double loss = 0;
  for (const auto& ex : batch) {
    const auto lg = example_loss_grad(p, ex.bag->features, ex.golden);
    q += lg.grad.query;
    loss += lg.loss;
  }
  EXPECT_NEAR(total.loss, loss / 40, 1e-12);
  EXPECT_LT((total.grad.query - q / 40).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AdamW, MatchesScalarRecursion) {
  Gen g(26);
  ModelParams p = ModelParams::zeros(Variant::kAvg, 1, 1);
  p.query(0, 0) = 0.5;
  p.classifier(0, 0) = -1.2;
  p.bias(0) = 0.3;
  oracle::ScalarAdamW q{0.5}, c{-1.2}, b{0.3};
  AdamWState state = AdamWState::zeros_like(p);
  for (int t = 0; t < 200; ++t) {
    ParamTensors grad = ParamTensors::zeros_like(p);
    grad.query(0, 0) = g.normal();
    grad.classifier(0, 0) = g.normal();
    grad.bias(0) = g.normal();
    const double lr = g.uniform(1e-4, 1e-1);
    optimizer_step(p, grad, state, lr, 0.01);
    q.step(grad.query(0, 0), lr, 0.01);
    c.step(grad.classifier(0, 0), lr, 0.01);
    b.step(grad.bias(0), lr, 0.01, false);
  }
  EXPECT_EQ(state.step, 200u);
  EXPECT_NEAR(p.query(0, 0), q.theta, 1e-12);
  EXPECT_NEAR(p.classifier(0, 0), c.theta, 1e-12);
  EXPECT_NEAR(p.bias(0), b.theta, 1e-12);
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  ModelParams p = ModelParams::zeros(Variant::kAvg, 1, 1);
  AdamWState state = AdamWState::zeros_like(p);
  ParamTensors grad = ParamTensors::zeros_like(p);
  grad.bias(0) = 3.0;
  optimizer_step(p, grad, state, 0.1, 0.0);
  EXPECT_NEAR(p.bias(0), -0.1, 1e-8);
}

TEST(Schedule, WarmupThenPlateauDecay) {
  const TrainingConfig cfg;
  EXPECT_NEAR(lr_schedule(0, 0, cfg), 7e-6, 1e-18);
  EXPECT_NEAR(lr_schedule(500, 0, cfg), 3.85e-5, 1e-18);
  EXPECT_NEAR(lr_schedule(1000, 0, cfg), 7e-5, 1e-18);
  EXPECT_NEAR(lr_schedule(5000, 2, cfg), 7e-7, 1e-18);
  double prev = 0;
  for (std::size_t s = 0; s <= 1000; ++s) {
    const double lr = lr_schedule(s, 0, cfg);
    EXPECT_GE(lr, prev);
    prev = lr;
  }
}

TEST(PlateauTracker, CountsStaleRuns) {
  PlateauTracker t(2, 1e-4);
  EXPECT_FALSE(t.observe(0.5));
  EXPECT_FALSE(t.observe(0.6));
  EXPECT_FALSE(t.observe(0.60005));
  EXPECT_TRUE(t.observe(0.55));
  EXPECT_EQ(t.plateaus(), 1u);
  EXPECT_FALSE(t.observe(0.59));
  EXPECT_TRUE(t.observe(0.58));
  EXPECT_EQ(t.plateaus(), 2u);
  EXPECT_FALSE(t.observe(0.7));
  EXPECT_NEAR(t.best(), 0.7, 1e-15);
}

TEST(TrainingConfig, DefaultsAndValidation) {
  const TrainingConfig cfg;
  EXPECT_EQ(cfg.bag_size, 50u);
  EXPECT_EQ(cfg.batch_size, 60u);
  EXPECT_EQ(cfg.learning_rate, 7e-5);
  EXPECT_EQ(cfg.weight_decay, 0.01);
  EXPECT_NO_THROW(cfg.validate());
  auto bad = cfg;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.warmup_start_lr = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.decay_factor = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(InitParams, SeededGaussianWithZeroBias) {
  const ModelParams a = init_params(Variant::kAtt, 40, 64, 3);
  EXPECT_EQ(a.query, init_params(Variant::kAtt, 40, 64, 3).query);
  EXPECT_NE(a.query, init_params(Variant::kAtt, 40, 64, 4).query);
  EXPECT_EQ(a.bias.cwiseAbs().maxCoeff(), 0.0);
  const double var = a.query.squaredNorm() / double(a.query.size());
  EXPECT_NEAR(var, 1.0 / 64, 0.1 / 64);
}

TEST(ExpandExamples, OneExamplePerLabelWithOptionalMasking) {
  Bag b;
  b.labels = {1, 3};
  std::vector<Bag> bags{b};
  auto plain = expand_examples(bags, false);
  ASSERT_EQ(plain.size(), 2u);
  EXPECT_TRUE(plain[0].masked.empty());
  auto masked = expand_examples(bags, true);
  EXPECT_EQ(masked[0].masked, (std::vector<RelationId>{3}));
  EXPECT_EQ(masked[1].masked, (std::vector<RelationId>{1}));
}

SyntheticDataset tiny_data(std::uint64_t seed) {
  SynthConfig c;
  c.entities = 20;
  c.train_bags = 120;
  c.validation_bags = 40;
  c.test_bags = 40;
  c.bag_size = 10;
  c.seed = seed;
  return gen_synthetic(c);
}

TEST(Train, DeterministicForFixedSeed) {
  const auto data = tiny_data(1);
  auto cfg = desk_scale_training_config(5);
  cfg.max_epochs = 4;
  const auto a = train(data.split, Variant::kContrastiveAtt, cfg, data.schema);
  const auto b = train(data.split, Variant::kContrastiveAtt, cfg, data.schema);
  EXPECT_EQ(a.params.query, b.params.query);
  EXPECT_EQ(a.params.classifier, b.params.classifier);
  EXPECT_EQ(a.history.best_metric, b.history.best_metric);
  ASSERT_EQ(a.history.epochs.size(), 4u);
  EXPECT_GE(a.history.best_epoch, 1u);
}

TEST(Train, BeatsRandomParamsOnValidation) {
  const auto data = tiny_data(2);
  auto cfg = desk_scale_training_config(0);
  cfg.max_epochs = 15;
  const auto res = train(data.split, Variant::kAvg, cfg, data.schema);
  const std::array<double, 0> none{};
  const auto random = init_params(Variant::kAvg, data.schema.relations.size(), 16, 99);
  const auto ev = evaluate(predict_all(random, data.split.validation, data.schema), data.split.validation_facts,
                           data.schema.relations, none);
  EXPECT_GT(res.history.best_metric, (ev.report.auc + ev.report.mauc) / 2);
}

TEST(Train, ZeroEpochsReturnInitialParams) {
  const auto data = tiny_data(3);
  auto cfg = desk_scale_training_config(8);
  cfg.max_epochs = 0;
  const auto res = train(data.split, Variant::kAtt, cfg, data.schema);
  EXPECT_TRUE(res.history.empty());
  EXPECT_EQ(res.params.query, init_params(Variant::kAtt, data.schema.relations.size(), 16, 8).query);
}

TEST(Train, RejectsEmptySplits) {
  auto data = tiny_data(4);
  auto cfg = desk_scale_training_config();
  auto no_train = data.split;
  no_train.train.clear();
  EXPECT_THROW(train(no_train, Variant::kAvg, cfg, data.schema), ConfigError);
  auto no_valid = data.split;
  no_valid.validation.clear();
  EXPECT_THROW(train(no_valid, Variant::kAvg, cfg, data.schema), ConfigError);
}

TEST(Train, HistoryCsvHasHeaderAndOneRowPerEpoch) {
  testing::TempDir dir;
  const auto data = tiny_data(5);
  auto cfg = desk_scale_training_config();
  cfg.max_epochs = 3;
  const auto res = train(data.split, Variant::kAvg, cfg, data.schema);
  res.history.write_csv((dir / "h.csv").string());
  std::ifstream in(dir / "h.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,loss,val_auc,val_mauc,lr,plateaus");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(GridSearch, KeepsTheBestValidationTrial) {
  const auto data = tiny_data(6);
  auto cfg = desk_scale_training_config();
  cfg.max_epochs = 3;
  const auto res = grid_search_train(data.split, Variant::kAvg, cfg, {{0.001, 0.03}, {0.01, 1.0}}, data.schema);
  ASSERT_EQ(res.trials.size(), 4u);
  double best = -1;
  for (const auto& t : res.trials) best = std::max(best, t.best_metric);
  EXPECT_EQ(res.best.history.best_metric, best);
  EXPECT_EQ(res.config.warmup_start_lr, res.config.learning_rate / 10);
  EXPECT_THROW(grid_search_train(data.split, Variant::kAvg, cfg, {{}, {0.1}}, data.schema), ConfigError);
}

}  // namespace
}  // namespace milcke
