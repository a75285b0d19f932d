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

#include "mngac/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mngac/losses.hpp"

namespace mngac {

void AttackSpec::validate() const {
  if (kind == AttackKind::SaltPepper) {
    if (!(max_fraction > 0.0 && max_fraction <= 1.0)) throw InvalidArgument(name + ": max_fraction must lie in (0, 1]");
    if (trials < 0) throw InvalidArgument(name + ": trials must be >= 0");
    return;
  }
  if (steps < 1) throw InvalidArgument(name + ": steps must be >= 1");
  if (!(step_size > 0.0)) throw InvalidArgument(name + ": step_size must be > 0");
  if (!(ball.epsilon >= 0.0) || !std::isfinite(ball.epsilon)) throw InvalidArgument(name + ": epsilon must be >= 0");
  if (ball.p == NormKind::Linf && ball.epsilon > 0.0 && !(step_size < 2.0 * ball.epsilon)) {
    throw InvalidArgument(name + ": linf step_size must be below 2*epsilon");
  }
  if (ball.p == NormKind::L1 && !(sparsity > 0.0 && sparsity <= 1.0)) {
    throw InvalidArgument(name + ": sparsity must lie in (0, 1]");
  }
}

const std::vector<std::string>& attack_names() {
  static const std::vector<std::string> names = {"pgd-linf", "pgd-l1", "pgd-l2", "salt-pepper"};
  return names;
}

AttackSpec default_attack(std::string_view name, std::size_t input_size, bool training) {
  const double scale = static_cast<double>(input_size) / 3072.0;
  AttackSpec spec;
  spec.name = std::string(name);
  if (name == "pgd-linf") {
    spec.ball = {NormKind::Linf, 8.0 / 255.0};
    spec.step_size = 0.004;
    spec.steps = 10;
  } else if (name == "pgd-l1") {
    spec.ball = {NormKind::L1, 2000.0 / 255.0 * scale};
    spec.step_size = 1.0 * scale;
    spec.steps = training ? 20 : 100;
  } else if (name == "pgd-l2") {
    spec.ball = {NormKind::L2, 128.0 / 255.0 * std::sqrt(scale)};
    spec.step_size = 0.1 * std::sqrt(scale);
    spec.steps = 10;
  } else if (name == "salt-pepper") {
    spec.kind = AttackKind::SaltPepper;
    spec.ball = {NormKind::L1, 0.0};
    spec.steps = 1;
    spec.random_init = false;
  } else {
    throw InvalidArgument("unknown attack '" + std::string(name) + "'");
  }
  return spec;
}

PerturbationSet::PerturbationSet(std::vector<AttackSpec> attacks) : attacks_(std::move(attacks)) {
  if (attacks_.empty()) throw InvalidArgument("perturbation set must not be empty");
  for (const auto& a : attacks_) a.validate();
}

std::size_t PerturbationSet::sample_index(Rng& rng) const {
  if (attacks_.empty()) throw InvalidArgument("cannot sample from an empty perturbation set");
  return rng.index(attacks_.size());
}

Tensor<double> pgd_attack(const Classifier& model, const Tensor<double>& x, std::span<const int> labels,
                          const AttackSpec& spec, Rng& rng) {
  spec.validate();
  if (spec.kind != AttackKind::Pgd) throw InvalidArgument(spec.name + " is not a PGD attack");
  Tensor<double> adv = x;
  if (spec.random_init) {
    for (std::size_t s = 0; s < adv.batch(); ++s) {
      auto sample = adv.sample(s);
      std::vector<double> delta(sample.size());
      sample_uniform_ball(delta, spec.ball.p, spec.ball.epsilon, rng);
      for (std::size_t i = 0; i < sample.size(); ++i) sample[i] = std::clamp(sample[i] + delta[i], 0.0, 1.0);
    }
  }
  Tensor<double> grad;
  for (int step = 0; step < spec.steps; ++step) {
    const double loss = model.loss_input_grad(adv, labels, &grad);
    if (!std::isfinite(loss)) {
      throw NumericError(spec.name + ": non-finite loss at PGD step " + std::to_string(step));
    }
    const Tensor<double> dir = steepest_direction(grad, spec.ball.p, spec.sparsity);
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += spec.step_size * dir[i];
    adv = project_ball(x, adv, spec.ball);
    for (double& v : adv.values()) v = std::clamp(v, 0.0, 1.0);
  }
  return adv;
}

Tensor<double> salt_pepper_attack(const Classifier& model, const Tensor<double>& x, std::span<const int> labels,
                                  double max_fraction, int trials, Rng& rng) {
  if (!(max_fraction > 0.0 && max_fraction <= 1.0)) throw InvalidArgument("salt-pepper: max_fraction must lie in (0, 1]");
  if (x.rank() != 4) throw InvalidArgument("salt-pepper expects (batch, channels, height, width) images");
  Tensor<double> out = x;
  if (trials <= 0 || x.batch() == 0) return out;
  const std::size_t n = x.batch(), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<char> done(n, 0);
  {
    const auto pred = predictions(model.logits(x));
    for (std::size_t s = 0; s < n; ++s) done[s] = pred[s] != labels[s];
  }
  std::vector<std::size_t> pixels(hw);
  for (int t = 0; t < trials; ++t) {
    const double fraction = max_fraction * std::pow(0.5, trials - 1 - t);
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(hw))));
    Tensor<double> trial = x;
    for (std::size_t s = 0; s < n; ++s) {
      std::iota(pixels.begin(), pixels.end(), std::size_t{0});
      auto sample = trial.sample(s);
      for (std::size_t j = 0; j < std::min(count, hw); ++j) {
        std::swap(pixels[j], pixels[j + rng.index(hw - j)]);
        const double value = rng.coin() ? 1.0 : 0.0;
        for (std::size_t ci = 0; ci < c; ++ci) sample[ci * hw + pixels[j]] = value;
      }
    }
    const auto pred = predictions(model.logits(trial));
    bool all_done = true;
    for (std::size_t s = 0; s < n; ++s) {
      if (!done[s] && pred[s] != labels[s]) {
        std::copy(trial.sample(s).begin(), trial.sample(s).end(), out.sample(s).begin());
        done[s] = 1;
      }
      all_done = all_done && done[s];
    }
    if (all_done) break;
  }
  return out;
}

Tensor<double> run_attack(const Classifier& model, const Tensor<double>& x, std::span<const int> labels,
                          const AttackSpec& spec, Rng& rng) {
  if (spec.kind == AttackKind::SaltPepper) {
    return salt_pepper_attack(model, x, labels, spec.max_fraction, spec.trials, rng);
  }
  return pgd_attack(model, x, labels, spec, rng);
}

}  // namespace mngac
