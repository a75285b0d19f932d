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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "mngac/attacks.hpp"
#include "mngac/models.hpp"

namespace mngac {

enum class Method { Nat, AdvSingle, AdvAvg, AdvMax, Sat, MngAc };

Method parse_method(std::string_view name);
std::string method_name(Method m);

/// Triangular cyclic schedule: 0 at epoch 0, max_lr at N/2, 0 at N.
struct LrSchedule {
  double max_lr = 0.21;
  double total_epochs = 30.0;
};

double lr_at(const LrSchedule& schedule, double fractional_epoch);

struct SgdOptions {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// buf = momentum * buf + (grad + weight_decay * param); param -= lr * buf.
void sgd_step(ParamSet<double>& params, ParamSet<double>& momentum, const ParamSet<double>& grad, double lr,
              const SgdOptions& options);

/// Where the consistency loss gets its augmented samples: the meta-learned
/// generator, or plain projected Gaussian noise (no meta step).
enum class NoiseSource { Generator, Gaussian };

NoiseSource parse_noise_source(std::string_view name);
std::string noise_source_name(NoiseSource s);

struct TrainOptions {
  double beta = 12.0;
  NoiseSource noise = NoiseSource::Generator;
  SgdOptions theta;
  SgdOptions phi{0.0, 0.0};
  /// Inner lookahead rate; negative means "use the scheduled lr".
  double meta_lr = -1.0;
  /// Generator rate; negative means "use the scheduled lr".
  double generator_lr = -1.0;
};

/// Everything that evolves during training: classifier theta, generator phi,
/// their momentum buffers, the step counter and the random streams.
struct TrainState {
  Classifier classifier;
  MetaNoiseGenerator generator;
  ParamSet<double> theta_momentum;
  ParamSet<double> phi_momentum;
  std::uint64_t step = 0;
  Rng attack_rng;
  Rng noise_rng;

  TrainState(Classifier c, MetaNoiseGenerator g, std::uint64_t attack_seed, std::uint64_t noise_seed);
};

/// Per-step diagnostics. Phase times are wall-clock seconds.
struct StepStats {
  double loss = 0.0;
  int attack_calls = 0;
  std::size_t attack_index = 0;
  double attack_seconds = 0.0;
  double meta_seconds = 0.0;
  double update_seconds = 0.0;
};

StepStats nat_step(TrainState& state, const Batch& batch, double lr, const TrainOptions& options = {});

/// One sampled attack, one SGD step on its adversarial loss.
StepStats sat_step(TrainState& state, const Batch& batch, const PerturbationSet& set, double lr,
                   const TrainOptions& options = {});

/// Mean adversarial loss over every attack in the set.
StepStats avg_step(TrainState& state, const Batch& batch, const PerturbationSet& set, double lr,
                   const TrainOptions& options = {});

/// Per-example loss of the strongest attack in the set.
StepStats max_step(TrainState& state, const Batch& batch, const PerturbationSet& set, double lr,
                   const TrainOptions& options = {});

/// Stochastic adversarial training with the meta-learned noise generator and
/// the consistency loss:
///   1. sample an attack, craft x_adv under theta;
///   2. draw z, build x_aug with phi;
///   3. lookahead theta_hat = theta - meta_lr * grad_theta cls(theta | x_aug);
///   4. phi -= generator_lr * d/dphi cls(theta_hat(phi) | x_adv)  (second order);
///   5. draw a fresh z, rebuild x_aug with the new phi;
///   6. theta takes an SGD step on cls(x_adv) + beta * JSD(clean, adv, aug).
/// theta_hat is discarded.
StepStats mng_ac_step(TrainState& state, const Batch& batch, const PerturbationSet& set, double lr,
                      const TrainOptions& options = {});

/// Dispatches on `method`. AdvSingle requires a one-attack set.
StepStats train_step(Method method, TrainState& state, const Batch& batch, const PerturbationSet& set, double lr,
                     const TrainOptions& options);

/// d/dphi cls(theta_hat(phi) | x_adv, y) where
/// theta_hat(phi) = theta - meta_lr * grad_theta cls(theta | x_aug(phi, z), y).
/// Computed exactly by forward-over-reverse differentiation.
ParamSet<double> meta_gradient(const Classifier& classifier, const MetaNoiseGenerator& generator,
                               const Batch& batch, const Tensor<double>& x_adv, const Tensor<double>& z,
                               const NormBallSpec& ball, double meta_lr, double* lookahead_loss = nullptr);

/// The lookahead loss itself, cls(theta_hat(phi) | x_adv, y), for a given phi.
/// This is the scalar whose phi-gradient `meta_gradient` returns.
double lookahead_loss(const Classifier& classifier, const MetaNoiseGenerator& generator,
                      const ParamSet<double>& phi, const Batch& batch, const Tensor<double>& x_adv,
                      const Tensor<double>& z, const NormBallSpec& ball, double meta_lr);

}  // namespace mngac
