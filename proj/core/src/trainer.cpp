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

#include "mngac/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mngac/losses.hpp"

namespace mngac {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_finite_params(const ParamSet<double>& grads, const std::string& stage) {
  for (const auto& g : grads) {
    for (double v : g.values()) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + stage);
    }
  }
}

void add_scaled(ParamSet<double>& acc, const ParamSet<double>& g, double scale) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    for (std::size_t j = 0; j < acc[i].size(); ++j) acc[i][j] += scale * g[i][j];
  }
}

double resolve_rate(double configured, double scheduled) { return configured < 0.0 ? scheduled : configured; }

Tensor<double> gaussian_augment(const Tensor<double>& x, Tensor<double> z, const NormBallSpec& ball) {
  for (std::size_t s = 0; s < z.batch(); ++s) project_delta<double>(z.sample(s), ball.p, ball.epsilon);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::clamp(x[i] + z[i], 0.0, 1.0);
  return z;
}

}  // namespace

Method parse_method(std::string_view name) {
  if (name == "nat") return Method::Nat;
  if (name == "adv_single") return Method::AdvSingle;
  if (name == "adv_avg") return Method::AdvAvg;
  if (name == "adv_max") return Method::AdvMax;
  if (name == "sat") return Method::Sat;
  if (name == "mng_ac") return Method::MngAc;
  throw InvalidArgument("unknown method '" + std::string(name) +
                        "' (expected nat, adv_single, adv_avg, adv_max, sat or mng_ac)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Nat:
      return "nat";
    case Method::AdvSingle:
      return "adv_single";
    case Method::AdvAvg:
      return "adv_avg";
    case Method::AdvMax:
      return "adv_max";
    case Method::Sat:
      return "sat";
    case Method::MngAc:
      return "mng_ac";
  }
  return "?";
}

NoiseSource parse_noise_source(std::string_view name) {
  if (name == "generator") return NoiseSource::Generator;
  if (name == "gaussian") return NoiseSource::Gaussian;
  throw InvalidArgument("unknown noise source '" + std::string(name) + "' (expected generator or gaussian)");
}

std::string noise_source_name(NoiseSource s) { return s == NoiseSource::Generator ? "generator" : "gaussian"; }

double lr_at(const LrSchedule& schedule, double fractional_epoch) {
  if (!(schedule.max_lr > 0.0) || !(schedule.total_epochs > 0.0)) {
    throw InvalidArgument("lr schedule needs positive max_lr and total_epochs");
  }
  if (fractional_epoch < 0.0 || fractional_epoch > schedule.total_epochs) {
    throw InvalidArgument("fractional epoch outside [0, N]");
  }
  const double half = schedule.total_epochs / 2.0;
  if (fractional_epoch <= half) return schedule.max_lr * fractional_epoch / half;
  return schedule.max_lr * (schedule.total_epochs - fractional_epoch) / half;
}

void sgd_step(ParamSet<double>& params, ParamSet<double>& momentum, const ParamSet<double>& grad, double lr,
              const SgdOptions& options) {
  if (params.size() != momentum.size() || params.size() != grad.size()) {
    throw InvalidArgument("sgd_step: parameter, momentum and gradient lists differ in length");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = momentum[i];
    const auto& g = grad[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d = g[j] + options.weight_decay * p[j];
      m[j] = options.momentum * m[j] + d;
      p[j] -= lr * m[j];
    }
  }
}

TrainState::TrainState(Classifier c, MetaNoiseGenerator g, std::uint64_t attack_seed, std::uint64_t noise_seed)
    : classifier(std::move(c)),
      generator(std::move(g)),
      theta_momentum(zeros_like<double>(classifier.params())),
      phi_momentum(zeros_like<double>(generator.params())),
      attack_rng(attack_seed),
      noise_rng(noise_seed) {}

StepStats nat_step(TrainState& state, const Batch& batch, double lr, const TrainOptions& options) {
  StepStats stats;
  const auto start = Clock::now();
  ParamSet<double> grad;
  stats.loss = state.classifier.loss_param_grad(state.classifier.params(), batch.x, batch.y, grad);
  require_finite_params(grad, "natural update");
  sgd_step(state.classifier.params(), state.theta_momentum, grad, lr, options.theta);
  stats.update_seconds = seconds_since(start);
  ++state.step;
  return stats;
}

StepStats sat_step(TrainState& state, const Batch& batch, const PerturbationSet& set, double lr,
                   const TrainOptions& options) {
  StepStats stats;
  auto start = Clock::now();
  stats.attack_index = set.sample_index(state.attack_rng);
  const Tensor<double> x_adv = run_attack(state.classifier, batch.x, batch.y, set[stats.attack_index], state.attack_rng);
  stats.attack_calls = 1;
  stats.attack_seconds = seconds_since(start);

  start = Clock::now();
  ParamSet<double> grad;
  stats.loss = state.classifier.loss_param_grad(state.classifier.params(), x_adv, batch.y, grad);
  require_finite_params(grad, "adversarial update");
  sgd_step(state.classifier.params(), state.theta_momentum, grad, lr, options.theta);
  stats.update_seconds = seconds_since(start);
  ++state.step;
  return stats;
}

StepStats avg_step(TrainState& state, const Batch& batch, const PerturbationSet& set, double lr,
                   const TrainOptions& options) {
  StepStats stats;
  std::vector<Tensor<double>> adversarial;
  auto start = Clock::now();
  for (const auto& spec : set.attacks()) {
    adversarial.push_back(run_attack(state.classifier, batch.x, batch.y, spec, state.attack_rng));
    ++stats.attack_calls;
  }
  stats.attack_seconds = seconds_since(start);

  start = Clock::now();
  ParamSet<double> total = zeros_like<double>(state.classifier.params());
  ParamSet<double> grad;
  const double inv_n = 1.0 / static_cast<double>(set.size());
  for (const auto& x_adv : adversarial) {
    stats.loss += inv_n * state.classifier.loss_param_grad(state.classifier.params(), x_adv, batch.y, grad);
    add_scaled(total, grad, inv_n);
  }
  require_finite_params(total, "average update");
  sgd_step(state.classifier.params(), state.theta_momentum, total, lr, options.theta);
  stats.update_seconds = seconds_since(start);
  ++state.step;
  return stats;
}

StepStats max_step(TrainState& state, const Batch& batch, const PerturbationSet& set, double lr,
                   const TrainOptions& options) {
  StepStats stats;
  std::vector<Tensor<double>> adversarial;
  auto start = Clock::now();
  for (const auto& spec : set.attacks()) {
    adversarial.push_back(run_attack(state.classifier, batch.x, batch.y, spec, state.attack_rng));
    ++stats.attack_calls;
  }
  stats.attack_seconds = seconds_since(start);

  start = Clock::now();
  const std::size_t n = batch.size();
  std::vector<double> best(n, -1.0);
  std::vector<std::size_t> choice(n, 0);
  for (std::size_t k = 0; k < adversarial.size(); ++k) {
    const auto losses = cls_loss_per_example(state.classifier.logits(adversarial[k]), batch.y);
    for (std::size_t s = 0; s < n; ++s) {
      if (losses[s] > best[s]) {
        best[s] = losses[s];
        choice[s] = k;
      }
    }
  }
  Tensor<double> worst(batch.x.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const auto src = adversarial[choice[s]].sample(s);
    std::copy(src.begin(), src.end(), worst.sample(s).begin());
  }
  ParamSet<double> grad;
  stats.loss = state.classifier.loss_param_grad(state.classifier.params(), worst, batch.y, grad);
  require_finite_params(grad, "max update");
  sgd_step(state.classifier.params(), state.theta_momentum, grad, lr, options.theta);
  stats.update_seconds = seconds_since(start);
  ++state.step;
  return stats;
}

double lookahead_loss(const Classifier& classifier, const MetaNoiseGenerator& generator,
                      const ParamSet<double>& phi, const Batch& batch, const Tensor<double>& x_adv,
                      const Tensor<double>& z, const NormBallSpec& ball, double meta_lr) {
  const Tensor<double> x_aug = augment_forward<double>(generator, phi, z, batch.x, ball, nullptr);
  ParamSet<double> grad;
  classifier.loss_param_grad(classifier.params(), x_aug, batch.y, grad);
  ParamSet<double> lookahead = classifier.params();
  add_scaled(lookahead, grad, -meta_lr);
  return cls_loss<double>(classifier.logits(lookahead, x_adv), batch.y);
}

ParamSet<double> meta_gradient(const Classifier& classifier, const MetaNoiseGenerator& generator,
                               const Batch& batch, const Tensor<double>& x_adv, const Tensor<double>& z,
                               const NormBallSpec& ball, double meta_lr, double* lookahead_value) {
  const ParamSet<double>& theta = classifier.params();
  const ParamSet<double>& phi = generator.params();

  // Lookahead parameters on the augmented batch.
  const Tensor<double> x_aug = augment_forward<double>(generator, phi, z, batch.x, ball, nullptr);
  ParamSet<double> grad;
  classifier.loss_param_grad(theta, x_aug, batch.y, grad);
  require_finite_params(grad, "lookahead gradient");
  ParamSet<double> lookahead = theta;
  add_scaled(lookahead, grad, -meta_lr);

  // Feedback from the adversarial batch at the lookahead point.
  ParamSet<double> feedback;
  const double outer = classifier.loss_param_grad(lookahead, x_adv, batch.y, feedback);
  if (lookahead_value) *lookahead_value = outer;
  require_finite_params(feedback, "lookahead feedback");

  // d/dphi <grad_theta cls(theta | x_aug(phi)), feedback>, exactly, by pushing
  // the tangent `feedback` through theta in a dual-number backward pass.
  const ParamSet<Dual> theta_dual = to_dual(theta, feedback);
  const ParamSet<Dual> phi_dual = to_dual(phi);
  AugmentTape<Dual> aug_tape;
  const Tensor<Dual> aug =
      augment_forward<Dual>(generator, phi_dual, to_dual(z), to_dual(batch.x), ball, &aug_tape);
  Tape<Dual> tape;
  const Tensor<Dual> logits = classifier.net().forward<Dual>(theta_dual, aug, &tape);
  Tensor<Dual> dlogits;
  cls_loss<Dual>(logits, batch.y, &dlogits);
  Tensor<Dual> daug = classifier.net().backward<Dual>(theta_dual, tape, std::move(dlogits), {}, true);
  ParamSet<Dual> dphi = zeros_like<Dual>(phi);
  augment_backward<Dual>(generator, phi_dual, aug_tape, ball, std::move(daug), dphi);

  ParamSet<double> hyper = zeros_like<double>(phi);
  for (std::size_t i = 0; i < hyper.size(); ++i) {
    for (std::size_t j = 0; j < hyper[i].size(); ++j) hyper[i][j] = -meta_lr * dphi[i][j].t;
  }
  return hyper;
}

StepStats mng_ac_step(TrainState& state, const Batch& batch, const PerturbationSet& set, double lr,
                      const TrainOptions& options) {
  if (!(options.beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
  StepStats stats;
  auto start = Clock::now();
  stats.attack_index = set.sample_index(state.attack_rng);
  const AttackSpec& attack = set[stats.attack_index];
  const Tensor<double> x_adv = run_attack(state.classifier, batch.x, batch.y, attack, state.attack_rng);
  stats.attack_calls = 1;
  stats.attack_seconds = seconds_since(start);

  start = Clock::now();
  const NormBallSpec ball = attack.kind == AttackKind::Pgd ? attack.ball : NormBallSpec{NormKind::Linf, 0.0};
  const double meta_lr = resolve_rate(options.meta_lr, lr);
  const Tensor<double> z = sample_noise(batch.x.shape(), state.noise_rng);
  if (options.noise == NoiseSource::Generator) {
    ParamSet<double> hyper;
    try {
      hyper = meta_gradient(state.classifier, state.generator, batch, x_adv, z, ball, meta_lr);
      require_finite_params(hyper, "generator meta-gradient");
    } catch (const NumericError& e) {
      throw NumericError(std::string("meta step: ") + e.what());
    }
    sgd_step(state.generator.params(), state.phi_momentum, hyper, resolve_rate(options.generator_lr, lr),
             options.phi);
  }
  stats.meta_seconds = seconds_since(start);

  start = Clock::now();
  const Classifier& model = state.classifier;
  const ParamSet<double>& theta = model.params();
  Tape<double> adv_tape;
  const Tensor<double> adv_logits = model.net().forward<double>(theta, x_adv, &adv_tape);
  Tensor<double> d_adv;
  const double cls = cls_loss<double>(adv_logits, batch.y, &d_adv);
  ParamSet<double> grad = zeros_like<double>(theta);
  double ac = 0.0;
  if (options.beta > 0.0) {
    const Tensor<double> z2 = sample_noise(batch.x.shape(), state.noise_rng);
    const Tensor<double> x_aug = options.noise == NoiseSource::Generator
                                     ? augment_forward<double>(state.generator, state.generator.params(), z2, batch.x,
                                                               ball, nullptr)
                                     : gaussian_augment(batch.x, z2, ball);
    Tape<double> clean_tape, aug_tape;
    const Tensor<double> clean_logits = model.net().forward<double>(theta, batch.x, &clean_tape);
    const Tensor<double> aug_logits = model.net().forward<double>(theta, x_aug, &aug_tape);
    Tensor<double> ac_clean, ac_adv, ac_aug;
    ac = ac_loss_from_logits(clean_logits, adv_logits, aug_logits, &ac_clean, &ac_adv, &ac_aug);
    for (std::size_t i = 0; i < d_adv.size(); ++i) {
      d_adv[i] += options.beta * ac_adv[i];
      ac_clean[i] *= options.beta;
      ac_aug[i] *= options.beta;
    }
    model.net().backward<double>(theta, clean_tape, std::move(ac_clean), grad, false);
    model.net().backward<double>(theta, aug_tape, std::move(ac_aug), grad, false);
  } else {
    // The regenerated x_aug only enters through the consistency term; draw
    // its noise anyway so the noise stream does not depend on beta.
    sample_noise(batch.x.shape(), state.noise_rng);
  }
  model.net().backward<double>(theta, adv_tape, std::move(d_adv), grad, false);
  require_finite_params(grad, "classifier update");
  stats.loss = total_loss(cls, ac, options.beta);
  sgd_step(state.classifier.params(), state.theta_momentum, grad, lr, options.theta);
  stats.update_seconds = seconds_since(start);
  ++state.step;
  return stats;
}

StepStats train_step(Method method, TrainState& state, const Batch& batch, const PerturbationSet& set, double lr,
                     const TrainOptions& options) {
  switch (method) {
    case Method::Nat:
      return nat_step(state, batch, lr, options);
    case Method::AdvSingle:
      if (set.size() != 1) throw InvalidArgument("adv_single trains against exactly one attack");
      return sat_step(state, batch, set, lr, options);
    case Method::AdvAvg:
      return avg_step(state, batch, set, lr, options);
    case Method::AdvMax:
      return max_step(state, batch, set, lr, options);
    case Method::Sat:
      return sat_step(state, batch, set, lr, options);
    case Method::MngAc:
      return mng_ac_step(state, batch, set, lr, options);
  }
  throw InvalidArgument("unknown method");
}

}  // namespace mngac
