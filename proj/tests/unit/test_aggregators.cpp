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
#include <algorithm>
#include <numeric>

#include "generators.hpp"
#include "milcke/aggregators.hpp"

namespace milcke {
namespace {

using testing::Gen;

Matrix permute_rows(const Matrix& m, const std::vector<Eigen::Index>& perm) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(perm[std::size_t(i)]);
  return out;
}

TEST(Softmax, StableAndNormalized) {
  Vector s(3);
  s << 1000, 1001, 1002;
  const Vector p = softmax(s);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  EXPECT_NEAR(p(2), 1.0 / (1 + std::exp(-1.0) + std::exp(-2.0)), 1e-15);
  const Vector lp = log_softmax(s);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::exp(lp(i)), p(i), 1e-13);
}

TEST(Softmax, ShiftInvariant) {
  Gen g(2);
  for (int t = 0; t < 50; ++t) {
    const Vector s = g.vector(g.integer(1, 9), 3.0);
    const Vector shifted = (s.array() + g.uniform(-50, 50)).matrix();
    EXPECT_LT((softmax(s) - softmax(shifted)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(AggAtt, ReferenceWeights) {
  Matrix v(2, 1);
  v << 0.0, 1.0;
  Vector q(1);
  q << std::log(3.0);
  const AttentionPool pool = agg_att(v, q);
  EXPECT_NEAR(pool.weights(0), 0.25, 1e-15);
  EXPECT_NEAR(pool.weights(1), 0.75, 1e-15);
  EXPECT_NEAR(pool.representation(0), 0.75, 1e-15);
}

TEST(AggAvg, IsTheRowMean) {
  Matrix v(2, 2);
  v << 1, 2, 3, 6;
  const Vector m = agg_avg(v);
  EXPECT_EQ(m(0), 2.0);
  EXPECT_EQ(m(1), 4.0);
}

TEST(AggOne, PicksHighestLogitWithFirstIndexOnTies) {
  ModelParams p = ModelParams::zeros(Variant::kOne, 2, 2);
  p.classifier.row(1) << 1, 0;
  Matrix v(3, 2);
  v << 1, 0, 5, 0, 5, 1;
  EXPECT_EQ(agg_one(v, p, 1).index, 1);
  EXPECT_EQ(agg_one(v, p, 0).index, 0);
}

TEST(Contrastive, ZeroQueryReducesToAverage) {
  Gen g(4);
  for (int t = 0; t < 100; ++t) {
    ModelParams p = g.params(Variant::kContrastiveAtt, std::size_t(g.integer(2, 6)), std::size_t(g.integer(1, 8)));
    p.query.setZero();
    const Matrix v = g.matrix(g.integer(1, 7), Eigen::Index(p.dim()));
    const BagForward f = agg_contrastive(v, p);
    const Vector avg = agg_avg(v);
    for (Eigen::Index i = 0; i < f.representations.rows(); ++i) {
      EXPECT_LT((f.representations.row(i).transpose() - avg).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Contrastive, AttentionRowsSumToOneAndLogitsMatchDefinition) {
  Gen g(6);
  ModelParams p = g.params(Variant::kContrastiveAtt, 4, 3);
  const Matrix v = g.matrix(5, 3);
  const BagForward f = agg_contrastive(v, p);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(f.attention.row(i).sum(), 1.0, 1e-14);
    EXPECT_NEAR(f.logits(i), p.classifier.row(i).dot(f.representations.row(i)) + p.bias(i), 1e-14);
  }
}

TEST(Aggregators, PermutationInvariant) {
  Gen g(9);
  for (Variant var : {Variant::kAvg, Variant::kAtt, Variant::kContrastiveAtt, Variant::kOne}) {
    for (int t = 0; t < 30; ++t) {
      const ModelParams p = g.params(var, std::size_t(g.integer(2, 6)), std::size_t(g.integer(1, 8)));
      const Matrix v = g.matrix(g.integer(1, 8), Eigen::Index(p.dim()));
      std::vector<Eigen::Index> perm(std::size_t(v.rows()));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), g.engine());
      const Matrix pv = permute_rows(v, perm);
      EXPECT_LT((relation_logits(p, v) - relation_logits(p, pv)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((score_bag(p, v) - score_bag(p, pv)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(ScoreBag, ZeroParamsGiveUniformDistribution) {
  Gen g(10);
  for (Variant var : {Variant::kAvg, Variant::kOne, Variant::kAtt, Variant::kContrastiveAtt}) {
    const ModelParams p = ModelParams::zeros(var, 5, 3);
    const Vector s = score_bag(p, g.matrix(4, 3));
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(s(i), 0.2, 1e-15);
  }
}

TEST(ScoreBag, LogitModeReturnsRawLogits) {
  Gen g(12);
  const ModelParams p = g.params(Variant::kAtt, 3, 2);
  const Matrix v = g.matrix(4, 2);
  const Vector logits = score_bag(p, v, ScoreMode::kLogit);
  EXPECT_LT((softmax(logits) - score_bag(p, v)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RelationLogits, AttAndContrastiveShareInference) {
  Gen g(13);
  ModelParams att = g.params(Variant::kAtt, 4, 3);
  ModelParams cst = att;
  cst.variant = Variant::kContrastiveAtt;
  const Matrix v = g.matrix(6, 3);
  EXPECT_EQ(relation_logits(att, v), relation_logits(cst, v));
}

TEST(RelationLogits, OneUsesBestInstancePerRelation) {
  Gen g(14);
  const ModelParams p = g.params(Variant::kOne, 3, 2);
  const Matrix v = g.matrix(5, 2);
  const Vector logits = relation_logits(p, v);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double best = (v * p.classifier.row(i).transpose()).maxCoeff() + p.bias(i);
    EXPECT_NEAR(logits(i), best, 1e-14);
  }
}

TEST(InstanceEvidence, WeightsFollowTheVariant) {
  Gen g(15);
  const Matrix v = g.matrix(4, 3);
  auto att = g.params(Variant::kContrastiveAtt, 3, 3);
  const auto ev = instance_evidence(att, v, 2);
  const Vector w = softmax(v * att.query.row(2).transpose());
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(ev[j].position, j);
    EXPECT_NEAR(ev[j].weight, w(Eigen::Index(j)), 1e-15);
  }
  auto avg = att;
  avg.variant = Variant::kAvg;
  for (const auto& e : instance_evidence(avg, v, 1)) EXPECT_EQ(e.weight, 0.25);
  auto one = att;
  one.variant = Variant::kOne;
  double total = 0;
  for (const auto& e : instance_evidence(one, v, 1)) total += e.weight;
  EXPECT_EQ(total, 1.0);
}

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::kAvg, Variant::kOne, Variant::kAtt, Variant::kContrastiveAtt}) {
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  }
  EXPECT_FALSE(parse_variant("max").has_value());
}

}  // namespace
}  // namespace milcke
