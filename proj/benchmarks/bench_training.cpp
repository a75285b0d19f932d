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

#include "mngac/attacks.hpp"
#include "mngac/trainer.hpp"

namespace {

using namespace mngac;

constexpr std::size_t kSide = 16;
constexpr std::size_t kBatch = 32;

Batch random_batch(std::uint64_t seed) {
  Rng rng(seed);
  Batch b{Tensor<double>({kBatch, 1, kSide, kSide}), std::vector<int>(kBatch)};
  for (auto& v : b.x.values()) v = rng.uniform(0.0, 1.0);
  for (auto& y : b.y) y = static_cast<int>(rng.index(10));
  return b;
}

TrainState make_state(Arch arch) {
  return TrainState(make_classifier(arch, 1, kSide, kSide, 10, 7, 8), MetaNoiseGenerator({1, kSide, kSide, 8, 0.01}, 8),
                    9, 10);
}

PerturbationSet training_set() {
  const std::size_t d = kSide * kSide;
  return PerturbationSet({default_attack("pgd-linf", d, true), default_attack("pgd-l1", d, true),
                          default_attack("pgd-l2", d, true)});
}

void BM_Pgd(benchmark::State& state, const char* name) {
  const Classifier model = make_classifier(Arch::SmallCnn, 1, kSide, kSide, 10, 7, 8);
  const Batch b = random_batch(1);
  const AttackSpec spec = default_attack(name, kSide * kSide, true);
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(pgd_attack(model, b.x, b.y, spec, rng));
}

void BM_Step(benchmark::State& state, Method method, Arch arch) {
  TrainState s = make_state(arch);
  const Batch b = random_batch(3);
  const PerturbationSet set = training_set();
  TrainOptions options;
  options.beta = 4.0;
  for (auto _ : state) benchmark::DoNotOptimize(train_step(method, s, b, set, 0.01, options));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Pgd, linf, "pgd-linf")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Pgd, l1, "pgd-l1")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Pgd, l2, "pgd-l2")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Step, sat_cnn, Method::Sat, Arch::SmallCnn)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Step, avg_cnn, Method::AdvAvg, Arch::SmallCnn)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Step, max_cnn, Method::AdvMax, Arch::SmallCnn)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Step, mng_ac_cnn, Method::MngAc, Arch::SmallCnn)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Step, mng_ac_linear, Method::MngAc, Arch::Linear)->Unit(benchmark::kMillisecond);
