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


#include <benchmark/benchmark.h>

#include <algorithm>
#include <array>
#include <random>
#include <string>

#include "milcke/metrics.hpp"

namespace {

struct Ranking {
  milcke::KnowledgeSchema schema;
  milcke::RankedPredictions ranked;
  std::vector<milcke::Triplet> heldout;
};

// Every ordered pair of `entities` scored for each relation; 5% are facts.
Ranking make_ranking(int entities, int relations) {
  std::vector<std::string> ents, rels{"NA"};
  for (int i = 0; i < entities; ++i) ents.push_back("e" + std::to_string(i));
  for (int i = 0; i < relations; ++i) rels.push_back("r" + std::to_string(i));
  Ranking out{{milcke::EntityVocab(ents), milcke::RelationSchema(rels)}, {}, {}};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit;
  for (int s = 0; s < entities; ++s) {
    for (int o = 0; o < entities; ++o) {
      if (s == o) continue;
      for (int r = 1; r <= relations; ++r) {
        const milcke::Triplet t{milcke::EntityId(s), milcke::RelationId(r), milcke::EntityId(o)};
        out.ranked.entries.push_back({t, unit(rng)});
        if (unit(rng) < 0.05) out.heldout.push_back(t);
      }
    }
  }
  milcke::sort_predictions(out.ranked.entries, out.schema);
  return out;
}

void BM_Evaluate(benchmark::State& state) {
  const Ranking r = make_ranking(int(state.range(0)), 20);
  const std::array<double, 3> k{1, 2, 5};
  for (auto _ : state) {
    benchmark::DoNotOptimize(milcke::evaluate(r.ranked, r.heldout, r.schema.relations, k));
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(r.ranked.size()));
}
BENCHMARK(BM_Evaluate)->Arg(20)->Arg(60);

void BM_SortPredictions(benchmark::State& state) {
  const Ranking r = make_ranking(int(state.range(0)), 20);
  std::vector<milcke::Prediction> shuffled = r.ranked.entries;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(9));
  for (auto _ : state) {
    auto copy = shuffled;
    milcke::sort_predictions(copy, r.schema);
    benchmark::DoNotOptimize(copy.data());
  }
}
BENCHMARK(BM_SortPredictions)->Arg(20)->Arg(60);

void BM_Ensemble(benchmark::State& state) {
  const Ranking a = make_ranking(40, 20);
  Ranking b = make_ranking(40, 20);
  for (auto& p : b.ranked.entries) p.score = 1 - p.score;
  const std::array<double, 2> w{0.6, 0.4};
  for (auto _ : state) benchmark::DoNotOptimize(milcke::ensemble({a.ranked, b.ranked}, w, a.schema));
}
BENCHMARK(BM_Ensemble);

}  // namespace
