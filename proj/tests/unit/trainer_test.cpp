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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mngac/attacks.hpp"
#include "mngac/error.hpp"
#include "mngac/losses.hpp"
#include "mngac/oracles.hpp"

namespace mngac {
namespace {

Batch random_batch(Rng& rng, std::size_t n, Shape image, std::size_t classes, double lo = 0.0, double hi = 1.0) {
  Shape shape = {n};
  shape.insert(shape.end(), image.begin(), image.end());
  Batch b{Tensor<double>(shape), std::vector<int>(n)};
  for (auto& v : b.x.values()) v = rng.uniform(lo, hi);
  for (auto& y : b.y) y = static_cast<int>(rng.index(classes));
  return b;
}

TrainState make_state(Arch arch, std::size_t side, std::size_t classes, std::uint64_t seed,
                      std::size_t gen_hidden = 4) {
  return TrainState(make_classifier(arch, 1, side, side, classes, seed, 2),
                    MetaNoiseGenerator({1, side, side, gen_hidden, 0.01}, seed + 1), seed + 2, seed + 3);
}

AttackSpec fixed_start(AttackSpec s) {
  s.random_init = false;
  return s;
}

PerturbationSet three_attacks(std::size_t d) {
  return PerturbationSet({default_attack("pgd-linf", d, true), default_attack("pgd-l1", d, true),
                          default_attack("pgd-l2", d, true)});
}

TEST(LrSchedule, TriangularShape) {
  const LrSchedule s{0.21, 30.0};
  EXPECT_EQ(lr_at(s, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(s, 15.0), 0.21);
  EXPECT_EQ(lr_at(s, 30.0), 0.0);
  EXPECT_DOUBLE_EQ(lr_at(s, 7.5), 0.105);
  EXPECT_DOUBLE_EQ(lr_at(s, 22.5), 0.105);
  EXPECT_THROW(lr_at(s, 31.0), InvalidArgument);
  EXPECT_THROW(lr_at({0.0, 30.0}, 1.0), InvalidArgument);
}

TEST(Sgd, MatchesHandSteppedReference) {
  ParamSet<double> p = {Tensor<double>({2}, std::vector<double>{1.0, -2.0})};
  ParamSet<double> m = zeros_like<double>(p);
  const SgdOptions opt{0.9, 5e-4};
  // Reference with f(w) = 0.5 * (3 w0^2 + w1^2).
  double w0 = 1.0, w1 = -2.0, b0 = 0.0, b1 = 0.0;
  for (int k = 0; k < 5; ++k) {
    const ParamSet<double> g = {Tensor<double>({2}, std::vector<double>{3.0 * p[0][0], p[0][1]})};
    sgd_step(p, m, g, 0.1, opt);
    b0 = 0.9 * b0 + (3.0 * w0 + 5e-4 * w0);
    b1 = 0.9 * b1 + (w1 + 5e-4 * w1);
    w0 -= 0.1 * b0;
    w1 -= 0.1 * b1;
    EXPECT_DOUBLE_EQ(p[0][0], w0);
    EXPECT_DOUBLE_EQ(p[0][1], w1);
    EXPECT_DOUBLE_EQ(m[0][0], b0);
  }
}

TEST(NatStep, ZeroRateLeavesParameters) {
  auto state = make_state(Arch::SmallCnn, 4, 3, 1);
  Rng rng(1);
  const auto batch = random_batch(rng, 4, {1, 4, 4}, 3);
  const auto before = state.classifier.hash();
  nat_step(state, batch, 0.0);
  EXPECT_EQ(state.classifier.hash(), before);
  EXPECT_EQ(state.step, 1u);
}

TEST(NatStep, LogisticRegressionConverges) {
  auto state = make_state(Arch::Linear, 2, 2, 3);
  Rng rng(2);
  Batch batch{Tensor<double>({64, 1, 2, 2}), std::vector<int>(64)};
  for (std::size_t s = 0; s < 64; ++s) {
    batch.y[s] = static_cast<int>(s % 2);
    for (double& v : batch.x.sample(s)) v = (batch.y[s] ? 0.7 : 0.3) + rng.uniform(-0.1, 0.1);
  }
  double loss = 0.0;
  for (int k = 0; k < 100; ++k) loss = nat_step(state, batch, 0.1).loss;
  EXPECT_LT(loss, 0.1);
  EXPECT_LT(cls_loss<double>(state.classifier.logits(batch.x), batch.y), 0.1);
}

TEST(NatStep, SeededRunsAgree) {
  Rng rng(3);
  const auto batch = random_batch(rng, 8, {1, 4, 4}, 3);
  auto a = make_state(Arch::SmallCnn, 4, 3, 5), b = make_state(Arch::SmallCnn, 4, 3, 5);
  for (int k = 0; k < 5; ++k) {
    nat_step(a, batch, 0.05);
    nat_step(b, batch, 0.05);
  }
  EXPECT_EQ(a.classifier.hash(), b.classifier.hash());
}

TEST(AttackCounts, SatRunsOneAttackAvgAndMaxRunAll) {
  Rng rng(4);
  const auto batch = random_batch(rng, 4, {1, 4, 4}, 3);
  for (std::size_t n = 1; n <= 3; ++n) {
    std::vector<AttackSpec> specs;
    for (std::size_t k = 0; k < n; ++k) specs.push_back(three_attacks(16)[k]);
    const PerturbationSet set(specs);
    auto state = make_state(Arch::Linear, 4, 3, 7);
    EXPECT_EQ(sat_step(state, batch, set, 0.01).attack_calls, 1);
    EXPECT_EQ(mng_ac_step(state, batch, set, 0.01).attack_calls, 1);
    EXPECT_EQ(avg_step(state, batch, set, 0.01).attack_calls, static_cast<int>(n));
    EXPECT_EQ(max_step(state, batch, set, 0.01).attack_calls, static_cast<int>(n));
  }
}

TEST(AttackCounts, AttackTimeScalesWithSetSize) {
  Rng rng(5);
  const auto batch = random_batch(rng, 32, {1, 8, 8}, 3);
  auto l1 = default_attack("pgd-l1", 64, true);
  l1.steps = 10;
  const PerturbationSet set({default_attack("pgd-linf", 64, true), l1, default_attack("pgd-l2", 64, true)});
  auto sat = make_state(Arch::SmallCnn, 8, 3, 9), avg = make_state(Arch::SmallCnn, 8, 3, 9);
  double sat_time = 0.0, avg_time = 0.0;
  for (int k = 0; k < 6; ++k) {
    sat_time += sat_step(sat, batch, set, 0.0).attack_seconds;
    avg_time += avg_step(avg, batch, set, 0.0).attack_seconds;
  }
  const double ratio = avg_time / sat_time;
  EXPECT_GT(ratio, 3.0 * 0.7);
  EXPECT_LT(ratio, 3.0 * 1.3);
}

TEST(SingletonSets, AllStrategiesReduceToOneAttack) {
  Rng rng(6);
  const auto batch = random_batch(rng, 6, {1, 4, 4}, 3);
  const PerturbationSet set({fixed_start(default_attack("pgd-l2", 16, true))});
  auto a = make_state(Arch::SmallCnn, 4, 3, 11), b = a, c = a, d = a;
  sat_step(a, batch, set, 0.05);
  avg_step(b, batch, set, 0.05);
  max_step(c, batch, set, 0.05);
  train_step(Method::AdvSingle, d, batch, set, 0.05, {});
  EXPECT_EQ(a.classifier.hash(), b.classifier.hash());
  EXPECT_EQ(a.classifier.hash(), c.classifier.hash());
  EXPECT_EQ(a.classifier.hash(), d.classifier.hash());
  EXPECT_THROW(train_step(Method::AdvSingle, d, batch, three_attacks(16), 0.05, {}), InvalidArgument);
}

TEST(MaxStep, LossIsAtLeastTheAverage) {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const auto batch = random_batch(rng, 8, {1, 4, 4}, 3);
    const auto all = three_attacks(16);
    std::vector<AttackSpec> specs;
    for (const auto& s : all.attacks()) specs.push_back(fixed_start(s));
    const PerturbationSet set(specs);
    auto a = make_state(Arch::SmallCnn, 4, 3, 20 + trial), b = a;
    EXPECT_GE(max_step(a, batch, set, 0.05).loss, avg_step(b, batch, set, 0.05).loss);
  }
}

TEST(MngAcStep, ZeroBetaAndZeroGeneratorIsSatExactly) {
  Rng rng(8);
  const auto batch = random_batch(rng, 8, {1, 4, 4}, 3);
  const auto set = three_attacks(16);
  auto sat = make_state(Arch::SmallCnn, 4, 3, 13);
  sat.generator.zero_output();
  auto mng = sat;
  TrainOptions options;
  options.beta = 0.0;
  for (int k = 0; k < 3; ++k) {
    sat_step(sat, batch, set, 0.05, options);
    mng_ac_step(mng, batch, set, 0.05, options);
  }
  const auto a = flatten_params(sat.classifier.params()), b = flatten_params(mng.classifier.params());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-7);
}

TEST(MngAcStep, SeededTrajectoriesAreBitIdentical) {
  Rng rng(9);
  const auto batch = random_batch(rng, 4, {1, 4, 4}, 3);
  const auto set = three_attacks(16);
  auto a = make_state(Arch::SmallCnn, 4, 3, 17), b = make_state(Arch::SmallCnn, 4, 3, 17);
  for (int k = 0; k < 10; ++k) {
    mng_ac_step(a, batch, set, 0.05);
    mng_ac_step(b, batch, set, 0.05);
    ASSERT_EQ(a.classifier.hash(), b.classifier.hash()) << "step " << k;
    ASSERT_EQ(a.generator.hash(), b.generator.hash()) << "step " << k;
  }
  EXPECT_EQ(a.step, 10u);
}

TEST(MngAcStep, RejectsNegativeBeta) {
  Rng rng(10);
  const auto batch = random_batch(rng, 2, {1, 4, 4}, 3);
  auto state = make_state(Arch::Linear, 4, 3, 1);
  TrainOptions options;
  options.beta = -1.0;
  EXPECT_THROW(mng_ac_step(state, batch, three_attacks(16), 0.05, options), InvalidArgument);
}

// Replays one step from a snapshot: the generator moves by the meta-gradient
// and the classifier by one SGD step on cls + beta * JSD, with the gradient
// taken by central differences. The lookahead never touches theta.
TEST(MngAcStep, ReplayFromSnapshotReproducesBothUpdates) {
  Rng rng(11);
  const auto batch = random_batch(rng, 6, {1, 4, 4}, 3, 0.2, 0.8);
  const PerturbationSet set({default_attack("pgd-l2", 16, true)});
  const auto snapshot = make_state(Arch::Linear, 4, 3, 19);
  auto stepped = snapshot;
  TrainOptions options;
  options.beta = 6.0;
  const double lr = 0.05;
  mng_ac_step(stepped, batch, set, lr, options);

  auto replay = snapshot;
  const auto& attack = set[set.sample_index(replay.attack_rng)];
  const auto x_adv = run_attack(replay.classifier, batch.x, batch.y, attack, replay.attack_rng);
  const auto z = sample_noise(batch.x.shape(), replay.noise_rng);
  const auto hyper = meta_gradient(replay.classifier, replay.generator, batch, x_adv, z, attack.ball, lr);
  sgd_step(replay.generator.params(), replay.phi_momentum, hyper, lr, options.phi);
  const auto phi_a = flatten_params(stepped.generator.params()), phi_b = flatten_params(replay.generator.params());
  for (std::size_t i = 0; i < phi_a.size(); ++i) EXPECT_NEAR(phi_a[i], phi_b[i], 1e-12);

  const auto z2 = sample_noise(batch.x.shape(), replay.noise_rng);
  const auto x_aug = augment_forward<double>(replay.generator, replay.generator.params(), z2, batch.x, attack.ball,
                                             nullptr);
  const auto& model = replay.classifier;
  auto objective = [&](std::span<const double> v) {
    const auto theta = unflatten_params(v, model.params());
    const auto adv = model.logits(theta, x_adv);
    const double ac = ac_loss({softmax(model.logits(theta, batch.x)), softmax(adv), softmax(model.logits(theta, x_aug))});
    return total_loss(cls_loss<double>(adv, batch.y), ac, options.beta);
  };
  const auto grad = unflatten_params(fd_gradient(objective, flatten_params(model.params()), 1e-6), model.params());
  sgd_step(replay.classifier.params(), replay.theta_momentum, grad, lr, options.theta);
  const auto a = flatten_params(stepped.classifier.params()), b = flatten_params(replay.classifier.params());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-7);
}

// Compares the exact meta-gradient with central differences of the
// lookahead objective through the independent oracle.
TEST(MetaGradient, MatchesFiniteDifferenceHypergradient) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    const std::size_t side = 3;
    const auto classifier = make_classifier(Arch::Linear, 1, side, side, 3, seed);
    ASSERT_LE(classifier.parameter_count(), 50u);
    const MetaNoiseGenerator generator({1, side, side, 2, 0.01}, 500 + seed);
    const auto batch = random_batch(rng, 4, {1, side, side}, 3, 0.3, 0.7);
    const NormBallSpec ball = seed % 2 ? NormBallSpec{NormKind::L2, 0.2} : NormBallSpec{NormKind::Linf, 0.05};
    const double meta_lr = 0.5;
    Rng attack_rng(seed);
    const auto x_adv = run_attack(classifier, batch.x, batch.y, default_attack("pgd-l2", side * side), attack_rng);

    Tensor<double> z;
    for (int attempt = 0;; ++attempt) {
      ASSERT_LT(attempt, 20);
      z = sample_noise(batch.x.shape(), rng);
      if (ball.p != NormKind::Linf) break;
      AugmentTape<double> tape;
      augment_forward<double>(generator, generator.params(), z, batch.x, ball, &tape);
      bool near_kink = false;
      for (double v : tape.noise.values()) near_kink |= std::abs(std::abs(v) - ball.epsilon) < 1e-2;
      if (!near_kink) break;
    }

    const auto exact = flatten_params(meta_gradient(classifier, generator, batch, x_adv, z, ball, meta_lr));

    const auto theta0 = flatten_params(classifier.params());
    auto train_grad = [&](std::span<const double> theta, std::span<const double> phi) {
      const auto aug = augment_forward<double>(generator, unflatten_params(phi, generator.params()), z, batch.x, ball,
                                               nullptr);
      ParamSet<double> g;
      classifier.loss_param_grad(unflatten_params(theta, classifier.params()), aug, batch.y, g);
      return flatten_params(g);
    };
    auto eval_loss = [&](std::span<const double> theta) {
      return cls_loss<double>(classifier.logits(unflatten_params(theta, classifier.params()), x_adv), batch.y);
    };
    const auto numeric =
        fd_hypergradient(train_grad, eval_loss, theta0, flatten_params(generator.params()), meta_lr, 1e-5);
    const auto report = compare_gradients(exact, numeric, 1e-5, 1e-3);
    EXPECT_TRUE(report.passed) << "seed " << seed << " err " << report.max_rel_err << " at " << report.worst_index;

    double value = 0.0;
    meta_gradient(classifier, generator, batch, x_adv, z, ball, meta_lr, &value);
    EXPECT_NEAR(value, lookahead_loss(classifier, generator, generator.params(), batch, x_adv, z, ball, meta_lr),
                1e-12);
  }
}

TEST(MetaGradient, LeavesClassifierAndGeneratorUntouched) {
  Rng rng(12);
  const auto state = make_state(Arch::SmallCnn, 4, 3, 23);
  const auto batch = random_batch(rng, 4, {1, 4, 4}, 3);
  const auto z = sample_noise(batch.x.shape(), rng);
  const auto theta = state.classifier.hash(), phi = state.generator.hash();
  meta_gradient(state.classifier, state.generator, batch, batch.x, z, {NormKind::L2, 0.3}, 0.1);
  EXPECT_EQ(state.classifier.hash(), theta);
  EXPECT_EQ(state.generator.hash(), phi);
}

TEST(Methods, NamesRoundTrip) {
  for (Method m : {Method::Nat, Method::AdvSingle, Method::AdvAvg, Method::AdvMax, Method::Sat, Method::MngAc}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  EXPECT_THROW(parse_method("trades"), InvalidArgument);
  EXPECT_EQ(parse_noise_source("gaussian"), NoiseSource::Gaussian);
  EXPECT_THROW(parse_noise_source("uniform"), InvalidArgument);
}

}  // namespace
}  // namespace mngac
