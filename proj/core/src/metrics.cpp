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


#include "milcke/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "milcke/io.hpp"

namespace milcke {

namespace {

using HeldoutSet = std::unordered_set<Triplet, TripletHash>;

HeldoutSet to_set(const std::vector<Triplet>& heldout) {
  return HeldoutSet(heldout.begin(), heldout.end());
}

std::size_t top_count(std::size_t n, double k_percent) {
  if (!(k_percent > 0 && k_percent <= 100)) throw ConfigError("K% must lie in (0, 100]");
  if (n == 0) return 0;
  // The epsilon absorbs representation error, e.g. 100 * 2 / 100.
  const double raw = static_cast<double>(n) * k_percent / 100.0;
  auto m = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(m, 1, n);
}

double f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void sort_predictions(std::vector<Prediction>& entries, const KnowledgeSchema& schema) {
  std::sort(entries.begin(), entries.end(), [&](const Prediction& a, const Prediction& b) {
    if (a.score != b.score) return a.score > b.score;
    const auto& ea = schema.entities;
    const auto& ra = schema.relations;
    if (a.triplet.subject != b.triplet.subject) return ea.name(a.triplet.subject) < ea.name(b.triplet.subject);
    if (a.triplet.relation != b.triplet.relation) {
      return ra.name(a.triplet.relation) < ra.name(b.triplet.relation);
    }
    return ea.name(a.triplet.object) < ea.name(b.triplet.object);
  });
}

RankedPredictions predict_all(const ModelParams& params, const std::vector<Bag>& bags,
                              const KnowledgeSchema& schema, ScoreMode mode) {
  RankedPredictions ranked;
  const RelationId na = schema.relations.na_id();
  ranked.entries.reserve(bags.size() * (schema.relations.size() - 1));
  for (const Bag& bag : bags) {
    const Vector scores = score_bag(params, bag.features, mode);
    for (RelationId r = 0; r < static_cast<RelationId>(scores.size()); ++r) {
      if (r == na) continue;
      ranked.entries.push_back({{bag.pair.subject, r, bag.pair.object}, scores(r)});
    }
  }
  sort_predictions(ranked.entries, schema);
  return ranked;
}

PRCurve pr_curve(const RankedPredictions& ranked, const std::vector<Triplet>& heldout) {
  const HeldoutSet truth = to_set(heldout);
  if (truth.empty()) throw ConfigError("held-out fact set is empty");
  const double total = static_cast<double>(truth.size());
  PRCurve curve;
  curve.points.reserve(ranked.size());
  std::size_t hits = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (truth.contains(ranked.entries[k].triplet)) ++hits;
    curve.points.push_back({static_cast<double>(hits) / total,
                            static_cast<double>(hits) / static_cast<double>(k + 1)});
  }
  return curve;
}

double auc(const PRCurve& curve) {
  if (curve.points.empty()) return 0.0;
  double area = 0;
  double prev_r = 0, prev_p = curve.points.front().precision;
  for (const auto& pt : curve.points) {
    area += (pt.recall - prev_r) * (pt.precision + prev_p) / 2;
    prev_r = pt.recall;
    prev_p = pt.precision;
  }
  return area;
}

double max_f1(const PRCurve& curve) {
  double best = 0;
  for (const auto& pt : curve.points) best = std::max(best, f1(pt.precision, pt.recall));
  return best;
}

double p_at_k(const RankedPredictions& ranked, const std::vector<Triplet>& heldout, double k_percent) {
  const std::size_t m = top_count(ranked.size(), k_percent);
  if (m == 0) return 0.0;
  const HeldoutSet truth = to_set(heldout);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < m; ++k) {
    if (truth.contains(ranked.entries[k].triplet)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(m);
}

MacroMetrics macro_metrics(const RankedPredictions& ranked, const std::vector<Triplet>& heldout,
                           const RelationSchema& relations, std::span<const double> k_percents,
                           double grid_step) {
  if (!(grid_step > 0 && grid_step <= 1)) throw ConfigError("recall grid step must lie in (0, 1]");
  if (heldout.empty()) throw ConfigError("held-out fact set is empty");

  const auto grid_points = static_cast<std::size_t>(std::llround(1.0 / grid_step)) + 1;
  std::vector<double> grid(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g) {
    grid[g] = std::min(1.0, static_cast<double>(g) * grid_step);
  }

  std::vector<RankedPredictions> per_ranked(relations.size());
  std::vector<std::vector<Triplet>> per_heldout(relations.size());
  for (const auto& p : ranked.entries) per_ranked[static_cast<std::size_t>(p.triplet.relation)].entries.push_back(p);
  for (const auto& t : to_set(heldout)) per_heldout[static_cast<std::size_t>(t.relation)].push_back(t);

  MacroMetrics m;
  std::vector<double> avg(grid_points, 0.0);
  for (RelationId r = 0; r < static_cast<RelationId>(relations.size()); ++r) {
    if (relations.is_na(r)) continue;
    const auto ri = static_cast<std::size_t>(r);
    if (per_heldout[ri].empty()) {
      m.excluded.push_back(r);
      continue;
    }
    m.relations.push_back(r);
    const PRCurve curve = pr_curve(per_ranked[ri], per_heldout[ri]);
    m.mean_relation_auc += auc(curve);
    m.mean_relation_max_f1 += max_f1(curve);

    // Suffix maximum of precision gives the right envelope in one pass.
    std::vector<double> suffix_max(curve.points.size() + 1, 0.0);
    for (std::size_t k = curve.points.size(); k-- > 0;) {
      suffix_max[k] = std::max(suffix_max[k + 1], curve.points[k].precision);
    }
    std::size_t first = 0;
    for (std::size_t g = 0; g < grid_points; ++g) {
      while (first < curve.points.size() && curve.points[first].recall < grid[g] - 1e-12) ++first;
      avg[g] += suffix_max[first];
    }
    for (double k : k_percents) m.m_p_at_k[k] += p_at_k(per_ranked[ri], per_heldout[ri], k);
  }
  if (m.relations.empty()) throw ConfigError("no relation has held-out facts");

  const double count = static_cast<double>(m.relations.size());
  m.mean_relation_auc /= count;
  m.mean_relation_max_f1 /= count;
  for (auto& [k, v] : m.m_p_at_k) v /= count;
  for (std::size_t g = 0; g < grid_points; ++g) {
    avg[g] /= count;
    m.curve.points.push_back({grid[g], avg[g]});
  }
  for (std::size_t g = 1; g < grid_points; ++g) {
    m.mauc += (grid[g] - grid[g - 1]) * (avg[g] + avg[g - 1]) / 2;
  }
  m.m_max_f1 = max_f1(m.curve);
  return m;
}

Evaluation evaluate(const RankedPredictions& ranked, const std::vector<Triplet>& heldout,
                    const RelationSchema& relations, std::span<const double> k_percents) {
  Evaluation ev;
  ev.micro_curve = pr_curve(ranked, heldout);
  ev.report.auc = auc(ev.micro_curve);
  ev.report.max_f1 = max_f1(ev.micro_curve);
  for (double k : k_percents) ev.report.p_at_k[k] = p_at_k(ranked, heldout, k);
  ev.macro = macro_metrics(ranked, heldout, relations, k_percents);
  ev.report.mauc = ev.macro.mauc;
  ev.report.m_max_f1 = ev.macro.m_max_f1;
  ev.report.m_p_at_k = ev.macro.m_p_at_k;
  return ev;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("spearman: inputs differ in length");
  if (a.size() < 2) throw ConfigError("spearman: need at least two values");
  for (double v : a) if (!std::isfinite(v)) throw ConfigError("spearman: non-finite value");
  for (double v : b) if (!std::isfinite(v)) throw ConfigError("spearman: non-finite value");

  auto ranks = [](std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> rank(x.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2 + 1;
      for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
      i = j + 1;
    }
    return rank;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) throw ConfigError("spearman: zero rank variance, correlation undefined");
  return cov / std::sqrt(va * vb);
}

RankedPredictions ensemble(const std::vector<RankedPredictions>& sources, std::span<const double> weights,
                           const KnowledgeSchema& schema) {
  if (sources.size() != weights.size()) {
    throw ConfigError("ensemble: " + std::to_string(sources.size()) + " sources but " +
                      std::to_string(weights.size()) + " weights");
  }
  if (sources.empty()) throw ConfigError("ensemble: no sources");
  bool any_nonzero = false;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0) throw ConfigError("ensemble: weights must be finite and non-negative");
    any_nonzero = any_nonzero || w != 0;
  }
  if (!any_nonzero) throw ConfigError("ensemble: all weights are zero");

  std::unordered_map<Triplet, double, TripletHash> combined;
  std::vector<Triplet> order;  // first-seen order keeps the result independent of hashing
  for (std::size_t s = 0; s < sources.size(); ++s) {
    const auto& entries = sources[s].entries;
    if (entries.empty()) continue;
    double lo = entries.front().score, hi = entries.front().score;
    for (const auto& p : entries) {
      lo = std::min(lo, p.score);
      hi = std::max(hi, p.score);
    }
    const double range = hi - lo;
    for (const auto& p : entries) {
      // A constant-score source contributes its full weight to every candidate.
      const double norm = range > 0 ? (p.score - lo) / range : 1.0;
      auto [it, inserted] = combined.try_emplace(p.triplet, 0.0);
      if (inserted) order.push_back(p.triplet);
      it->second += weights[s] * norm;
    }
  }
  RankedPredictions out;
  out.entries.reserve(order.size());
  for (const auto& t : order) out.entries.push_back({t, combined[t]});
  sort_predictions(out.entries, schema);
  return out;
}

std::vector<double> search_ensemble_weights(const std::vector<RankedPredictions>& sources,
                                            const std::vector<Triplet>& heldout,
                                            const KnowledgeSchema& schema, double step) {
  if (sources.empty()) throw ConfigError("ensemble: no sources");
  if (!(step > 0 && step <= 1)) throw ConfigError("ensemble: weight step must lie in (0, 1]");
  const auto units = static_cast<int>(std::llround(1.0 / step));
  const std::size_t n = sources.size();

  std::vector<double> best;
  double best_auc = -1;
  std::vector<int> counts(n, 0);
  // Enumerate compositions of `units` into n non-negative parts.
  auto visit = [&](auto&& self, std::size_t idx, int remaining) -> void {
    if (idx + 1 == n) {
      counts[idx] = remaining;
      std::vector<double> w(n);
      for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<double>(counts[i]) / units;
      const double a = auc(pr_curve(ensemble(sources, w, schema), heldout));
      if (a > best_auc) {
        best_auc = a;
        best = w;
      }
      return;
    }
    for (int c = remaining; c >= 0; --c) {
      counts[idx] = c;
      self(self, idx + 1, remaining - c);
    }
  };
  visit(visit, 0, units);
  return best;
}

void write_predictions(std::ostream& out, const RankedPredictions& ranked, const KnowledgeSchema& schema) {
  for (const auto& p : ranked.entries) {
    out << schema.entities.name(p.triplet.subject) << '\t' << schema.relations.name(p.triplet.relation)
        << '\t' << schema.entities.name(p.triplet.object) << '\t' << format_double(p.score) << '\n';
  }
}

void write_predictions(const std::filesystem::path& path, const RankedPredictions& ranked,
                       const KnowledgeSchema& schema) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_predictions(out, ranked, schema);
}

RankedPredictions load_predictions(const std::filesystem::path& path, const KnowledgeSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
  RankedPredictions ranked;
  std::unordered_set<Triplet, TripletHash> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line, '\t');
    if (f.size() != 4) throw ParseError(path.string(), line_no, "expected 4 tab-separated fields");
    auto s = schema.entities.find(f[0]);
    auto r = schema.relations.find(f[1]);
    auto o = schema.entities.find(f[2]);
    if (!s || !o) throw ParseError(path.string(), line_no, "unknown entity");
    if (!r) throw ParseError(path.string(), line_no, "unknown relation '" + f[1] + "'");
    double score = 0;
    const auto res = std::from_chars(f[3].data(), f[3].data() + f[3].size(), score);
    if (res.ec != std::errc() || res.ptr != f[3].data() + f[3].size() || !std::isfinite(score)) {
      throw ParseError(path.string(), line_no, "invalid score '" + f[3] + "'");
    }
    if (schema.relations.is_na(*r)) continue;
    Triplet t{*s, *r, *o};
    if (!seen.insert(t).second) throw ParseError(path.string(), line_no, "duplicate candidate triplet");
    ranked.entries.push_back({t, score});
  }
  sort_predictions(ranked.entries, schema);
  return ranked;
}

KnowledgeSchema schema_from_predictions(std::span<const std::filesystem::path> paths) {
  std::set<std::string> entities, relations;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto f = split_fields(line, '\t');
      if (f.size() != 4) throw ParseError(path.string(), line_no, "expected 4 tab-separated fields");
      entities.insert(f[0]);
      entities.insert(f[2]);
      relations.insert(f[1]);
    }
  }
  relations.insert(std::string(RelationSchema::kNaName));
  return {EntityVocab({entities.begin(), entities.end()}),
          RelationSchema({relations.begin(), relations.end()})};
}

void write_curve_csv(const std::filesystem::path& path, const PRCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << "recall,precision\n";
  for (const auto& pt : curve.points) out << format_double(pt.recall) << ',' << format_double(pt.precision) << '\n';
}

}  // namespace milcke
