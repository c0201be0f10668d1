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

#include <random>

#include "milcke/aggregators.hpp"
#include "milcke/trainer.hpp"

namespace {

using milcke::Matrix;

Matrix random_bag(Eigen::Index n, Eigen::Index d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Args: relations, bag size, feature dimension.
void BM_ScoreBag(benchmark::State& state, milcke::Variant variant) {
  const auto r = std::size_t(state.range(0));
  const auto n = state.range(1), d = state.range(2);
  const auto params = milcke::init_params(variant, r, std::size_t(d), 3);
  const Matrix bag = random_bag(n, d);
  for (auto _ : state) benchmark::DoNotOptimize(milcke::score_bag(params, bag));
}

void BM_LossGrad(benchmark::State& state, milcke::Variant variant) {
  const auto r = std::size_t(state.range(0));
  const auto n = state.range(1), d = state.range(2);
  const auto params = milcke::init_params(variant, r, std::size_t(d), 3);
  const Matrix bag = random_bag(n, d);
  for (auto _ : state) benchmark::DoNotOptimize(milcke::example_loss_grad(params, bag, 1));
}

#define MILCKE_SHAPES ->Args({11, 50, 16})->Args({51, 50, 64})->Args({51, 50, 512})

BENCHMARK_CAPTURE(BM_ScoreBag, avg, milcke::Variant::kAvg) MILCKE_SHAPES;
BENCHMARK_CAPTURE(BM_ScoreBag, one, milcke::Variant::kOne) MILCKE_SHAPES;
BENCHMARK_CAPTURE(BM_ScoreBag, cst_att, milcke::Variant::kContrastiveAtt) MILCKE_SHAPES;
BENCHMARK_CAPTURE(BM_LossGrad, avg, milcke::Variant::kAvg) MILCKE_SHAPES;
BENCHMARK_CAPTURE(BM_LossGrad, att, milcke::Variant::kAtt) MILCKE_SHAPES;
BENCHMARK_CAPTURE(BM_LossGrad, cst_att, milcke::Variant::kContrastiveAtt) MILCKE_SHAPES;

}  // namespace
