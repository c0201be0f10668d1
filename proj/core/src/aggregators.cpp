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


#include "milcke/aggregators.hpp"

#include <cmath>

namespace milcke {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kAvg:
      return "avg";
    case Variant::kOne:
      return "one";
    case Variant::kAtt:
      return "att";
    case Variant::kContrastiveAtt:
      return "cst-att";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : {Variant::kAvg, Variant::kOne, Variant::kAtt, Variant::kContrastiveAtt}) {
    if (variant_name(v) == name) return v;
  }
  return std::nullopt;
}

ModelParams ModelParams::zeros(Variant variant, std::size_t relations, std::size_t dim) {
  ModelParams p;
  p.variant = variant;
  const auto r = static_cast<Eigen::Index>(relations);
  const auto d = static_cast<Eigen::Index>(dim);
  p.query = Matrix::Zero(r, d);
  p.classifier = Matrix::Zero(r, d);
  p.bias = Vector::Zero(r);
  return p;
}

bool ModelParams::all_finite() const {
  return query.allFinite() && classifier.allFinite() && bias.allFinite();
}

Vector softmax(const Vector& scores) {
  Vector e = (scores.array() - scores.maxCoeff()).exp();
  return e / e.sum();
}

Vector log_softmax(const Vector& scores) {
  const double m = scores.maxCoeff();
  const double lse = m + std::log((scores.array() - m).exp().sum());
  return scores.array() - lse;
}

Vector agg_avg(const Matrix& features) {
  return features.colwise().sum().transpose() / static_cast<double>(features.rows());
}

InstanceSelection agg_one(const Matrix& features, const ModelParams& params, RelationId relation) {
  const Vector scores = features * params.classifier.row(relation).transpose();
  InstanceSelection sel;
  double best = scores(0);
  for (Eigen::Index j = 1; j < scores.size(); ++j) {
    if (scores(j) > best) {
      best = scores(j);
      sel.index = j;
    }
  }
  sel.representation = features.row(sel.index).transpose();
  return sel;
}

AttentionPool agg_att(const Matrix& features, const Vector& query) {
  AttentionPool pool;
  pool.weights = softmax(features * query);
  pool.representation = features.transpose() * pool.weights;
  return pool;
}

BagForward agg_contrastive(const Matrix& features, const ModelParams& params) {
  const Eigen::Index r = params.query.rows();
  BagForward fwd;
  // scores(i, j) = v_j . q_i
  const Matrix scores = params.query * features.transpose();
  fwd.attention.resize(r, features.rows());
  for (Eigen::Index i = 0; i < r; ++i) {
    fwd.attention.row(i) = softmax(scores.row(i).transpose()).transpose();
  }
  fwd.representations = fwd.attention * features;
  fwd.logits = (fwd.representations.cwiseProduct(params.classifier)).rowwise().sum() + params.bias;
  return fwd;
}

Vector relation_logits(const ModelParams& params, const Matrix& features) {
  switch (params.variant) {
    case Variant::kAvg:
      return params.classifier * agg_avg(features) + params.bias;
    case Variant::kOne: {
      // max_j (c_i . v_j) + b_i for every relation i.
      const Matrix inst = params.classifier * features.transpose();
      return inst.rowwise().maxCoeff() + params.bias;
    }
    case Variant::kAtt:
    case Variant::kContrastiveAtt:
      return agg_contrastive(features, params).logits;
  }
  return {};
}

Vector score_bag(const ModelParams& params, const Matrix& features, ScoreMode mode) {
  Vector logits = relation_logits(params, features);
  if (mode == ScoreMode::kLogit) return logits;
  return softmax(logits);
}

std::vector<InstanceEvidence> instance_evidence(const ModelParams& params, const Matrix& features,
                                                RelationId relation) {
  const auto n = static_cast<std::size_t>(features.rows());
  std::vector<InstanceEvidence> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j].position = j;

  switch (params.variant) {
    case Variant::kAvg:
      for (auto& e : out) e.weight = 1.0 / static_cast<double>(n);
      break;
    case Variant::kOne: {
      const auto sel = agg_one(features, params, relation);
      for (std::size_t j = 0; j < n; ++j) {
        out[j].score = features.row(static_cast<Eigen::Index>(j)).dot(params.classifier.row(relation)) +
                       params.bias(relation);
        out[j].weight = static_cast<Eigen::Index>(j) == sel.index ? 1.0 : 0.0;
      }
      break;
    }
    case Variant::kAtt:
    case Variant::kContrastiveAtt: {
      const Vector scores = features * params.query.row(relation).transpose();
      const Vector weights = softmax(scores);
      for (std::size_t j = 0; j < n; ++j) {
        out[j].score = scores(static_cast<Eigen::Index>(j));
        out[j].weight = weights(static_cast<Eigen::Index>(j));
      }
      break;
    }
  }
  return out;
}

}  // namespace milcke
