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

#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "milcke/aggregators.hpp"
#include "milcke/types.hpp"

namespace milcke {

struct Prediction {
  Triplet triplet;
  double score = 0;
};

// Candidate triplets sorted by descending score; ties ordered by
// (subject, relation, object) names. Never contains NA.
struct RankedPredictions {
  std::vector<Prediction> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

// Sorts in place with the ranking order described above.
void sort_predictions(std::vector<Prediction>& entries, const KnowledgeSchema& schema);

// Scores every (bag, non-NA relation) candidate and ranks them globally.
RankedPredictions predict_all(const ModelParams& params, const std::vector<Bag>& bags,
                              const KnowledgeSchema& schema,
                              ScoreMode mode = ScoreMode::kProbability);

struct PRPoint {
  double recall = 0;
  double precision = 0;
};

// One point per ranked prediction.
struct PRCurve {
  std::vector<PRPoint> points;
};

// Sweeps the ranking: at rank k, precision = hits(k)/k and
// recall = hits(k)/|heldout|. Throws ConfigError for an empty held-out set.
PRCurve pr_curve(const RankedPredictions& ranked, const std::vector<Triplet>& heldout);

// Trapezoidal area over recall with the curve anchored at
// (0, precision of the first point).
double auc(const PRCurve& curve);

// Maximum harmonic mean of precision and recall over the curve points.
double max_f1(const PRCurve& curve);

// Precision among the top ceil(|ranked| * k / 100) predictions.
double p_at_k(const RankedPredictions& ranked, const std::vector<Triplet>& heldout, double k_percent);

struct MacroMetrics {
  double mauc = 0;
  double m_max_f1 = 0;
  std::map<double, double> m_p_at_k;
  // Averaged right-envelope curve on the recall grid.
  PRCurve curve;
  // Relations with held-out facts that entered the average.
  std::vector<RelationId> relations;
  // Non-NA relations left out for lack of held-out facts.
  std::vector<RelationId> excluded;
  // Mean of per-relation metrics computed on each raw curve.
  double mean_relation_auc = 0;
  double mean_relation_max_f1 = 0;
};

// Macro evaluation: per-relation curves are interpolated onto
// {0, step, ..., 1} with the maximum precision at recall >= grid point
// (0 beyond the curve's reach) and averaged pointwise.
MacroMetrics macro_metrics(const RankedPredictions& ranked, const std::vector<Triplet>& heldout,
                           const RelationSchema& relations, std::span<const double> k_percents,
                           double grid_step = 0.01);

struct MetricReport {
  double auc = 0;
  double max_f1 = 0;
  std::map<double, double> p_at_k;
  double mauc = 0;
  double m_max_f1 = 0;
  std::map<double, double> m_p_at_k;
};

struct Evaluation {
  MetricReport report;
  PRCurve micro_curve;
  MacroMetrics macro;
};

Evaluation evaluate(const RankedPredictions& ranked, const std::vector<Triplet>& heldout,
                    const RelationSchema& relations, std::span<const double> k_percents);

// Spearman rank correlation with average ranks for ties. Throws ConfigError
// for mismatched lengths, fewer than two values or zero rank variance.
double spearman(std::span<const double> a, std::span<const double> b);

// Weighted sum of min-max normalized source scores over the union of
// candidates (a missing score counts as 0), re-ranked.
RankedPredictions ensemble(const std::vector<RankedPredictions>& sources,
                           std::span<const double> weights, const KnowledgeSchema& schema);

// Grid search over non-negative weights summing to 1 at the given step,
// maximizing micro AUC against `heldout`. The first maximum in enumeration
// order wins.
std::vector<double> search_ensemble_weights(const std::vector<RankedPredictions>& sources,
                                            const std::vector<Triplet>& heldout,
                                            const KnowledgeSchema& schema, double step = 0.1);

// Predictions TSV: subject<TAB>relation<TAB>object<TAB>score.
void write_predictions(std::ostream& out, const RankedPredictions& ranked, const KnowledgeSchema& schema);
void write_predictions(const std::filesystem::path& path, const RankedPredictions& ranked,
                       const KnowledgeSchema& schema);
// NA rows are dropped; the result is re-sorted.
RankedPredictions load_predictions(const std::filesystem::path& path, const KnowledgeSchema& schema);

// Builds a schema from the names used in prediction files: entities and
// relations in lexicographic order, plus NA.
KnowledgeSchema schema_from_predictions(std::span<const std::filesystem::path> paths);

void write_curve_csv(const std::filesystem::path& path, const PRCurve& curve);

}  // namespace milcke
