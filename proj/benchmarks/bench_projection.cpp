// Copyright 2026 The mngac Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "mngac/normball.hpp"
#include "mngac/rng.hpp"

namespace {

using namespace mngac;

Tensor<double> random_tensor(std::size_t batch, std::size_t d, double lo, double hi, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> t({batch, d});
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

void BM_ProjectBall(benchmark::State& state, NormKind p, double eps) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const Tensor<double> center = random_tensor(32, d, 0.0, 1.0, 1);
  const Tensor<double> point = random_tensor(32, d, 0.0, 1.0, 2);
  for (auto _ : state) benchmark::DoNotOptimize(project_ball(center, point, {p, eps}));
  state.SetItemsProcessed(state.iterations() * 32);
}

void BM_SteepestDirection(benchmark::State& state, NormKind p) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const Tensor<double> g = random_tensor(32, d, -1.0, 1.0, 3);
  for (auto _ : state) benchmark::DoNotOptimize(steepest_direction(g, p));
  state.SetItemsProcessed(state.iterations() * 32);
}

}  // namespace

BENCHMARK_CAPTURE(BM_ProjectBall, linf, NormKind::Linf, 0.03)->Arg(256)->Arg(3072);
BENCHMARK_CAPTURE(BM_ProjectBall, l2, NormKind::L2, 0.5)->Arg(256)->Arg(3072);
BENCHMARK_CAPTURE(BM_ProjectBall, l1, NormKind::L1, 12.0)->Arg(256)->Arg(3072);
BENCHMARK_CAPTURE(BM_SteepestDirection, l2, NormKind::L2)->Arg(3072);
BENCHMARK_CAPTURE(BM_SteepestDirection, l1, NormKind::L1)->Arg(3072);
