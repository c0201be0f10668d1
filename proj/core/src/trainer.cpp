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


#include "milcke/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "milcke/metrics.hpp"
#include "milcke/parallel.hpp"
#include "milcke/random.hpp"

namespace milcke {

namespace {

struct MaskedSoftmax {
  Vector probs;
  double loss = 0;
};

// Softmax over the unmasked relations and the negative log-probability of
// the golden one.
MaskedSoftmax masked_softmax_loss(const Vector& logits, RelationId golden,
                                  std::span<const RelationId> masked) {
  const Eigen::Index r = logits.size();
  std::vector<bool> off(static_cast<std::size_t>(r), false);
  for (RelationId m : masked) {
    if (m != golden && m >= 0 && m < r) off[static_cast<std::size_t>(m)] = true;
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < r; ++i) {
    if (!off[static_cast<std::size_t>(i)]) mx = std::max(mx, logits(i));
  }
  MaskedSoftmax out;
  out.probs = Vector::Zero(r);
  double sum = 0;
  for (Eigen::Index i = 0; i < r; ++i) {
    if (off[static_cast<std::size_t>(i)]) continue;
    out.probs(i) = std::exp(logits(i) - mx);
    sum += out.probs(i);
  }
  out.probs /= sum;
  out.loss = -(logits(golden) - mx - std::log(sum));
  return out;
}

// d(loss)/d(scores) for a softmax-attention row given d(loss)/d(weights).
Vector softmax_backward(const Vector& weights, const Vector& d_weights) {
  return weights.cwiseProduct((d_weights.array() - weights.dot(d_weights)).matrix());
}

}  // namespace

void TrainingConfig::validate() const {
  if (bag_size == 0) throw ConfigError("bag_size must be positive");
  if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(warmup_start_lr >= 0) || warmup_start_lr > learning_rate) {
    throw ConfigError("warmup_start_lr must lie in [0, learning_rate]");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
  if (plateau_patience == 0) throw ConfigError("plateau_patience must be positive");
  if (!(decay_factor > 0 && decay_factor <= 1)) throw ConfigError("decay_factor must lie in (0, 1]");
  if (max_plateaus == 0) throw ConfigError("max_plateaus must be positive");
  if (!(plateau_threshold >= 0)) throw ConfigError("plateau_threshold must be >= 0");
}

ParamTensors ParamTensors::zeros_like(const ModelParams& params) {
  return {Matrix::Zero(params.query.rows(), params.query.cols()),
          Matrix::Zero(params.classifier.rows(), params.classifier.cols()),
          Vector::Zero(params.bias.size())};
}

ParamTensors& ParamTensors::operator+=(const ParamTensors& other) {
  query += other.query;
  classifier += other.classifier;
  bias += other.bias;
  return *this;
}

ParamTensors& ParamTensors::operator*=(double s) {
  query *= s;
  classifier *= s;
  bias *= s;
  return *this;
}

bool ParamTensors::all_finite() const {
  return query.allFinite() && classifier.allFinite() && bias.allFinite();
}

double loss_ce(const Vector& logits, RelationId golden) { return -log_softmax(logits)(golden); }

double loss_infonce(const BagForward& forward, const ModelParams& params, RelationId golden) {
  (void)params;  // logits already carry c_i . B_i + b_i
  return loss_ce(forward.logits, golden);
}

LossGrad example_loss_grad(const ModelParams& params, const Matrix& features, RelationId golden,
                           std::span<const RelationId> masked) {
  LossGrad out;
  out.grad = ParamTensors::zeros_like(params);
  const Matrix& C = params.classifier;

  switch (params.variant) {
    case Variant::kAvg:
    case Variant::kOne:
    case Variant::kAtt: {
      // One shared bag representation, classified over all relations.
      Vector rep;
      AttentionPool pool;
      if (params.variant == Variant::kAvg) {
        rep = agg_avg(features);
      } else if (params.variant == Variant::kOne) {
        rep = agg_one(features, params, golden).representation;
      } else {
        pool = agg_att(features, params.query.row(golden).transpose());
        rep = pool.representation;
      }
      const Vector logits = C * rep + params.bias;
      auto sm = masked_softmax_loss(logits, golden, masked);
      out.loss = sm.loss;
      Vector d_logits = sm.probs;
      d_logits(golden) -= 1.0;
      out.grad.classifier = d_logits * rep.transpose();
      out.grad.bias = d_logits;
      if (params.variant == Variant::kAtt) {
        const Vector d_rep = C.transpose() * d_logits;
        const Vector d_weights = features * d_rep;
        const Vector d_scores = softmax_backward(pool.weights, d_weights);
        out.grad.query.row(golden) = (features.transpose() * d_scores).transpose();
      }
      // ONE: the argmax selection is piecewise constant, so no gradient flows
      // through the choice of instance.
      break;
    }
    case Variant::kContrastiveAtt: {
      const BagForward fwd = agg_contrastive(features, params);
      auto sm = masked_softmax_loss(fwd.logits, golden, masked);
      out.loss = sm.loss;
      Vector d_logits = sm.probs;
      d_logits(golden) -= 1.0;
      // logit_i = c_i . B_i + b_i
      out.grad.classifier = d_logits.asDiagonal() * fwd.representations;
      out.grad.bias = d_logits;
      const Matrix d_rep = d_logits.asDiagonal() * C;               // R x d
      const Matrix d_attn = d_rep * features.transpose();           // R x N
      const Vector row_dot = fwd.attention.cwiseProduct(d_attn).rowwise().sum();
      const Matrix d_scores =
          fwd.attention.cwiseProduct(d_attn - row_dot.replicate(1, d_attn.cols()));
      out.grad.query = d_scores * features;
      break;
    }
  }
  return out;
}

double example_loss(const ModelParams& params, const Matrix& features, RelationId golden,
                    std::span<const RelationId> masked) {
  switch (params.variant) {
    case Variant::kAvg:
      return masked_softmax_loss(params.classifier * agg_avg(features) + params.bias, golden, masked).loss;
    case Variant::kOne: {
      const Vector rep = agg_one(features, params, golden).representation;
      return masked_softmax_loss(params.classifier * rep + params.bias, golden, masked).loss;
    }
    case Variant::kAtt: {
      const Vector rep = agg_att(features, params.query.row(golden).transpose()).representation;
      return masked_softmax_loss(params.classifier * rep + params.bias, golden, masked).loss;
    }
    case Variant::kContrastiveAtt:
      return masked_softmax_loss(agg_contrastive(features, params).logits, golden, masked).loss;
  }
  return 0;
}

LossGrad batch_gradient(const ModelParams& params, std::span<const TrainingExample> batch, int epoch,
                        const EntityVocab* vocab) {
  if (batch.empty()) throw ConfigError("batch_gradient: empty batch");
  std::vector<LossGrad> parts(batch.size());
  const std::size_t work = batch.front().bag->features.size() * params.relations();
  parallel_for(
      batch.size(),
      [&](std::size_t i) {
        parts[i] = example_loss_grad(params, batch[i].bag->features, batch[i].golden, batch[i].masked);
      },
      std::max<std::size_t>(1, 20000 / std::max<std::size_t>(work, 1)));

  LossGrad total;
  total.grad = ParamTensors::zeros_like(params);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!std::isfinite(parts[i].loss) || !parts[i].grad.all_finite()) {
      const Bag& bag = *batch[i].bag;
      const std::string id = vocab != nullptr ? pair_label(bag.pair, *vocab)
                                              : std::to_string(bag.pair.subject) + "|" +
                                                    std::to_string(bag.pair.object);
      throw NumericalError(epoch, id, "non-finite loss or gradient");
    }
    total.loss += parts[i].loss;
    total.grad += parts[i].grad;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.loss *= inv;
  total.grad *= inv;
  return total;
}

AdamWState AdamWState::zeros_like(const ModelParams& params) {
  return {0, ParamTensors::zeros_like(params), ParamTensors::zeros_like(params)};
}

void optimizer_step(ModelParams& params, const ParamTensors& grads, AdamWState& state, double lr,
                    double weight_decay) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(AdamWState::kBeta1, t);
  const double c2 = 1.0 - std::pow(AdamWState::kBeta2, t);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v, bool decay) {
    m = AdamWState::kBeta1 * m + (1 - AdamWState::kBeta1) * grad;
    v = AdamWState::kBeta2 * v + (1 - AdamWState::kBeta2) * grad.cwiseProduct(grad);
    auto step = ((m.array() / c1) / ((v.array() / c2).sqrt() + AdamWState::kEpsilon)).matrix();
    if (decay) {
      param = param - lr * (step + weight_decay * param);
    } else {
      param = param - lr * step;
    }
  };
  update(params.query, grads.query, state.first.query, state.second.query, true);
  update(params.classifier, grads.classifier, state.first.classifier, state.second.classifier, true);
  update(params.bias, grads.bias, state.first.bias, state.second.bias, false);
}

double lr_schedule(std::size_t step, std::size_t plateaus, const TrainingConfig& config) {
  double lr = config.learning_rate;
  if (step < config.warmup_steps) {
    const double frac = static_cast<double>(step) / static_cast<double>(config.warmup_steps);
    lr = config.warmup_start_lr + (config.learning_rate - config.warmup_start_lr) * frac;
  }
  return lr * std::pow(config.decay_factor, static_cast<double>(plateaus));
}

bool PlateauTracker::observe(double metric) {
  if (metric > best_ + threshold_) {
    best_ = metric;
    stale_ = 0;
    return false;
  }
  best_ = std::max(best_, metric);
  if (++stale_ >= patience_) {
    stale_ = 0;
    ++plateaus_;
    return true;
  }
  return false;
}

ModelParams init_params(Variant variant, std::size_t relations, std::size_t dim, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(variant, relations, dim);
  Rng rng = make_rng(seed, "init-params");
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  for (Eigen::Index i = 0; i < p.query.size(); ++i) p.query.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < p.classifier.size(); ++i) p.classifier.data()[i] = normal(rng);
  return p;
}

void TrainingHistory::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "epoch,loss,val_auc,val_mauc,lr,plateaus\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.loss << ',' << e.val_auc << ',' << e.val_mauc << ',' << e.lr << ','
        << e.plateaus << '\n';
  }
}

std::vector<TrainingExample> expand_examples(const std::vector<Bag>& bags, bool mask_sibling_positives) {
  std::vector<TrainingExample> examples;
  for (const Bag& bag : bags) {
    for (RelationId golden : bag.labels) {
      TrainingExample ex{&bag, golden, {}};
      if (mask_sibling_positives) {
        for (RelationId other : bag.labels) {
          if (other != golden) ex.masked.push_back(other);
        }
      }
      examples.push_back(std::move(ex));
    }
  }
  return examples;
}

TrainingResult train(const DatasetSplit& data, Variant variant, const TrainingConfig& config,
                     const KnowledgeSchema& schema) {
  config.validate();
  if (data.train.empty()) throw ConfigError("training split is empty");
  if (data.validation.empty()) throw ConfigError("validation split is empty");
  if (data.validation_facts.empty()) throw ConfigError("validation split has no positive facts");

  const std::size_t relations = schema.relations.size();
  const auto dim = static_cast<std::size_t>(data.train.front().features.cols());

  TrainingResult result;
  ModelParams params = init_params(variant, relations, dim, config.seed);
  AdamWState state = AdamWState::zeros_like(params);
  result.params = params;
  result.optimizer = state;
  if (config.max_epochs == 0) return result;

  std::vector<TrainingExample> examples = expand_examples(data.train, config.mask_sibling_positives);
  const std::array<double, 0> no_k{};
  PlateauTracker tracker(config.plateau_patience, config.plateau_threshold);
  std::size_t step = 0;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng = make_rng(config.seed, "epoch-shuffle", epoch);
    std::shuffle(examples.begin(), examples.end(), rng);

    double loss_sum = 0;
    double lr = 0;
    for (std::size_t start = 0; start < examples.size(); start += config.batch_size) {
      const std::size_t end = std::min(examples.size(), start + config.batch_size);
      std::span<const TrainingExample> batch(examples.data() + start, end - start);
      LossGrad lg = batch_gradient(params, batch, static_cast<int>(epoch), &schema.entities);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      lr = lr_schedule(step, tracker.plateaus(), config);
      optimizer_step(params, lg.grad, state, lr, config.weight_decay);
      ++step;
      if (!params.all_finite()) {
        throw NumericalError(static_cast<int>(epoch), "batch@" + std::to_string(start),
                             "parameters became non-finite");
      }
    }

    const RankedPredictions ranked = predict_all(params, data.validation, schema, config.score_mode);
    const Evaluation ev = evaluate(ranked, data.validation_facts, schema.relations, no_k);
    const double metric = (ev.report.auc + ev.report.mauc) / 2;

    if (!have_best || metric > result.history.best_metric) {
      have_best = true;
      result.history.best_metric = metric;
      result.history.best_epoch = epoch;
      result.params = params;
      result.optimizer = state;
    }
    tracker.observe(metric);
    result.history.epochs.push_back({epoch, loss_sum / static_cast<double>(examples.size()),
                                     ev.report.auc, ev.report.mauc, lr, tracker.plateaus()});
    if (tracker.plateaus() >= config.max_plateaus) break;
  }
  return result;
}

GridSearchResult grid_search_train(const DatasetSplit& data, Variant variant, const TrainingConfig& base,
                                   const HyperGrid& grid, const KnowledgeSchema& schema) {
  if (grid.learning_rates.empty() || grid.weight_decays.empty()) throw ConfigError("hyperparameter grid is empty");
  GridSearchResult out;
  bool have = false;
  for (double lr : grid.learning_rates) {
    for (double wd : grid.weight_decays) {
      TrainingConfig cfg = base;
      cfg.learning_rate = lr;
      cfg.warmup_start_lr = lr / 10;
      cfg.weight_decay = wd;
      TrainingResult res = train(data, variant, cfg, schema);
      out.trials.push_back({lr, wd, res.history.best_metric});
      if (!have || res.history.best_metric > out.best.history.best_metric) {
        have = true;
        out.best = std::move(res);
        out.config = cfg;
      }
    }
  }
  return out;
}

}  // namespace milcke
