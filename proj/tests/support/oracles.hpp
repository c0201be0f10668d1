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

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <set>
#include <tuple>
#include <vector>

#include "milcke/bagbuilder.hpp"
#include "milcke/metrics.hpp"
#include "milcke/trainer.hpp"

// Reference implementations written independently of the library: plain
// loops over explicit hit lists, integer arithmetic where possible.
namespace milcke::oracle {

struct Curve {
  std::vector<std::size_t> hits;  // hits within the top k+1
  std::size_t relevant = 0;
};

inline Curve hit_curve(const std::vector<Prediction>& ranked, const std::vector<Triplet>& heldout) {
  std::set<Triplet> truth(heldout.begin(), heldout.end());
  Curve c;
  c.relevant = truth.size();
  std::size_t h = 0;
  for (const auto& p : ranked) {
    h += truth.count(p.triplet);
    c.hits.push_back(h);
  }
  return c;
}

inline double precision_at(const Curve& c, std::size_t k) { return double(c.hits[k]) / double(k + 1); }
inline double recall_at(const Curve& c, std::size_t k) { return double(c.hits[k]) / double(c.relevant); }

// Area as a sum of trapezoid strips; the first strip is flat at the first
// point's precision.
inline double auc(const Curve& c) {
  double area = 0;
  for (std::size_t k = 0; k < c.hits.size(); ++k) {
    const double r0 = k == 0 ? 0.0 : recall_at(c, k - 1);
    const double p0 = k == 0 ? precision_at(c, 0) : precision_at(c, k - 1);
    area += 0.5 * (recall_at(c, k) - r0) * (precision_at(c, k) + p0);
  }
  return area;
}

inline double max_f1(const Curve& c) {
  double best = 0;
  for (std::size_t k = 0; k < c.hits.size(); ++k) {
    const double p = precision_at(c, k), r = recall_at(c, k);
    if (p + r > 0) best = std::max(best, 2 * p * r / (p + r));
  }
  return best;
}

// Top count is the smallest m with 100 * m >= n * k, at least 1.
inline double p_at_k(const std::vector<Prediction>& ranked, const std::vector<Triplet>& heldout, int k_percent) {
  if (ranked.empty()) return 0;
  std::size_t m = 1;
  while (100 * m < ranked.size() * std::size_t(k_percent)) ++m;
  m = std::min(m, ranked.size());
  std::set<Triplet> truth(heldout.begin(), heldout.end());
  std::size_t h = 0;
  for (std::size_t i = 0; i < m; ++i) h += truth.count(ranked[i].triplet);
  return double(h) / double(m);
}

struct Macro {
  double mauc = 0;
  double mf1 = 0;
  double mp_at_k = 0;
  std::vector<double> curve;  // averaged precision on the 0.01 grid
};

// Grid point j (recall j/100) takes the best precision among points whose
// recall hits/relevant >= j/100, compared exactly in integers.
inline Macro macro(const std::vector<Prediction>& ranked, const std::vector<Triplet>& heldout,
                   std::size_t relations, RelationId na, int k_percent) {
  Macro m;
  m.curve.assign(101, 0.0);
  std::size_t used = 0;
  for (RelationId r = 0; r < RelationId(relations); ++r) {
    if (r == na) continue;
    std::vector<Prediction> mine;
    std::vector<Triplet> facts;
    for (const auto& p : ranked) if (p.triplet.relation == r) mine.push_back(p);
    for (const auto& t : heldout) if (t.relation == r) facts.push_back(t);
    if (facts.empty()) continue;
    ++used;
    const Curve c = hit_curve(mine, facts);
    for (int j = 0; j <= 100; ++j) {
      double best = 0;
      for (std::size_t k = 0; k < c.hits.size(); ++k) {
        if (100 * c.hits[k] >= std::size_t(j) * c.relevant) best = std::max(best, precision_at(c, k));
      }
      m.curve[std::size_t(j)] += best;
    }
    m.mp_at_k += p_at_k(mine, facts, k_percent);
  }
  for (double& v : m.curve) v /= double(used);
  m.mp_at_k /= double(used);
  for (int j = 1; j <= 100; ++j) m.mauc += 0.01 * (m.curve[std::size_t(j)] + m.curve[std::size_t(j - 1)]) / 2;
  for (int j = 0; j <= 100; ++j) {
    const double p = m.curve[std::size_t(j)], r = j / 100.0;
    if (p + r > 0) m.mf1 = std::max(m.mf1, 2 * p * r / (p + r));
  }
  return m;
}

// Intersection and union by counting unit cells; boxes have integer corners.
inline double cell_iou(const BoundingBox& a, const BoundingBox& b) {
  long inter = 0, area_a = 0, area_b = 0;
  for (int x = 0; x < 64; ++x) {
    for (int y = 0; y < 64; ++y) {
      const bool in_a = x >= a.x_min && x + 1 <= a.x_max && y >= a.y_min && y + 1 <= a.y_max;
      const bool in_b = x >= b.x_min && x + 1 <= b.x_max && y >= b.y_min && y + 1 <= b.y_max;
      area_a += in_a;
      area_b += in_b;
      inter += in_a && in_b;
    }
  }
  return double(inter) / double(area_a + area_b - inter);
}

// Overlapping candidates first by IoU descending, then the rest by squared
// centroid distance ascending; ties by (image id, manifest index).
inline std::vector<std::string> overlap_order(const std::vector<InstanceRecord>& candidates) {
  using Key = std::tuple<int, double, std::string, std::size_t, std::string>;
  std::vector<Key> keys;
  for (const auto& c : candidates) {
    const double v = cell_iou(c.subject_box, c.object_box);
    const double dx = (c.subject_box.x_min + c.subject_box.x_max) - (c.object_box.x_min + c.object_box.x_max);
    const double dy = (c.subject_box.y_min + c.subject_box.y_max) - (c.object_box.y_min + c.object_box.y_max);
    keys.emplace_back(v > 0 ? 0 : 1, v > 0 ? -v : dx * dx + dy * dy, c.image_id, c.manifest_index, c.instance_id);
  }
  std::sort(keys.begin(), keys.end());
  std::vector<std::string> ids;
  for (const auto& k : keys) ids.push_back(std::get<4>(k));
  return ids;
}

// Bag loss from scalar loops: -logit_g + log sum over unmasked relations.
inline double bag_loss(const ModelParams& p, const Matrix& v, RelationId golden,
                       std::span<const RelationId> masked = {}) {
  const auto R = p.classifier.rows(), N = v.rows(), d = v.cols();
  auto dot = [&](const Matrix& m, Eigen::Index row, Eigen::Index inst) {
    long double acc = 0;
    for (Eigen::Index k = 0; k < d; ++k) acc += (long double)m(row, k) * v(inst, k);
    return acc;
  };
  auto pool = [&](Eigen::Index query_row) {
    std::vector<long double> w(std::size_t(N), 0);
    long double top = -1e300L, z = 0;
    for (Eigen::Index j = 0; j < N; ++j) top = std::max(top, dot(p.query, query_row, j));
    for (Eigen::Index j = 0; j < N; ++j) z += w[std::size_t(j)] = std::exp(dot(p.query, query_row, j) - top);
    std::vector<long double> rep(std::size_t(d), 0);
    for (Eigen::Index j = 0; j < N; ++j) {
      for (Eigen::Index k = 0; k < d; ++k) rep[std::size_t(k)] += w[std::size_t(j)] / z * v(j, k);
    }
    return rep;
  };
  std::vector<long double> shared(std::size_t(d), 0);
  if (p.variant == Variant::kAvg) {
    for (Eigen::Index j = 0; j < N; ++j) {
      for (Eigen::Index k = 0; k < d; ++k) shared[std::size_t(k)] += v(j, k) / (long double)N;
    }
  } else if (p.variant == Variant::kOne) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < N; ++j) {
      if (dot(p.classifier, golden, j) > dot(p.classifier, golden, best)) best = j;
    }
    for (Eigen::Index k = 0; k < d; ++k) shared[std::size_t(k)] = v(best, k);
  } else if (p.variant == Variant::kAtt) {
    shared = pool(golden);
  }
  std::vector<long double> logits(static_cast<std::size_t>(R));
  for (Eigen::Index i = 0; i < R; ++i) {
    const auto rep = p.variant == Variant::kContrastiveAtt ? pool(i) : shared;
    long double acc = p.bias(i);
    for (Eigen::Index k = 0; k < d; ++k) acc += (long double)p.classifier(i, k) * rep[std::size_t(k)];
    logits[std::size_t(i)] = acc;
  }
  long double top = -1e300L, z = 0;
  auto kept = [&](Eigen::Index i) {
    return i == golden || std::find(masked.begin(), masked.end(), RelationId(i)) == masked.end();
  };
  for (Eigen::Index i = 0; i < R; ++i) if (kept(i)) top = std::max(top, logits[std::size_t(i)]);
  for (Eigen::Index i = 0; i < R; ++i) if (kept(i)) z += std::exp(logits[std::size_t(i)] - top);
  return double(top + std::log(z) - logits[std::size_t(golden)]);
}

// Central differences of the mean batch loss over every parameter.
struct GradCheck {
  double max_rel_error = 0;
  std::size_t checked = 0;
};

inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-5});
}

inline GradCheck finite_difference(const ModelParams& params, std::span<const TrainingExample> batch,
                                   double h = 1e-5) {
  auto loss = [&](const ModelParams& p) {
    double total = 0;
    for (const auto& ex : batch) total += bag_loss(p, ex.bag->features, ex.golden, ex.masked);
    return total / double(batch.size());
  };
  const LossGrad analytic = batch_gradient(params, batch);
  GradCheck out;
  ModelParams p = params;
  auto probe = [&](double& slot, double grad) {
    const double keep = slot;
    slot = keep + h;
    const double up = loss(p);
    slot = keep - h;
    const double down = loss(p);
    slot = keep;
    out.max_rel_error = std::max(out.max_rel_error, rel_error(grad, (up - down) / (2 * h)));
    ++out.checked;
  };
  for (Eigen::Index i = 0; i < p.query.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.query.cols(); ++j) {
      probe(p.query(i, j), analytic.grad.query(i, j));
      probe(p.classifier(i, j), analytic.grad.classifier(i, j));
    }
    probe(p.bias(i), analytic.grad.bias(i));
  }
  return out;
}

// AdamW on one scalar parameter, step by step.
struct ScalarAdamW {
  double theta, m = 0, v = 0;
  int t = 0;
  double step(double grad, double lr, double wd, bool decay = true) {
    ++t;
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mhat = m / (1 - std::pow(0.9, t));
    const double vhat = v / (1 - std::pow(0.999, t));
    if (decay) theta -= lr * wd * theta;
    theta -= lr * mhat / (std::sqrt(vhat) + 1e-8);
    return theta;
  }
};

}  // namespace milcke::oracle
