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

#include "mngac/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mngac/error.hpp"
#include "mngac/losses.hpp"
#include "mngac/oracles.hpp"
#include "mngac/rng.hpp"

namespace mngac {
namespace {

Tensor<double> random_images(Rng& rng, Shape shape, double lo = 0.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

TEST(Classifier, SameSeedSameParameters) {
  const auto a = make_classifier(Arch::SmallCnn, 3, 8, 8, 10, 42);
  const auto b = make_classifier(Arch::SmallCnn, 3, 8, 8, 10, 42);
  const auto c = make_classifier(Arch::SmallCnn, 3, 8, 8, 10, 43);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
}

TEST(Classifier, LinearParameterCount) {
  const auto m = make_classifier(Arch::Linear, 3, 5, 7, 4, 0);
  EXPECT_EQ(m.parameter_count(), 3u * 5 * 7 * 4 + 4);
}

TEST(Classifier, SmallCnnLogitShape) {
  const auto m = make_classifier(Arch::SmallCnn, 3, 32, 32, 10, 1);
  Rng rng(0);
  const auto logits = m.logits(random_images(rng, {8, 3, 32, 32}));
  EXPECT_EQ(logits.shape(), (Shape{8, 10}));
  for (double v : logits.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Classifier, ForwardIsPure) {
  const auto m = make_classifier(Arch::SmallCnn, 1, 8, 8, 3, 5);
  Rng rng(1);
  const auto x = random_images(rng, {2, 1, 8, 8});
  EXPECT_EQ(m.logits(x), m.logits(x));
  const std::vector<int> y = {0, 2};
  Tensor<double> g1, g2;
  EXPECT_EQ(m.loss_input_grad(x, y, &g1), m.loss_input_grad(x, y, &g2));
  EXPECT_EQ(g1, g2);
}

TEST(Classifier, ArchNames) {
  EXPECT_EQ(parse_arch("linear"), Arch::Linear);
  EXPECT_EQ(parse_arch(arch_name(Arch::SmallCnn)), Arch::SmallCnn);
  EXPECT_THROW(parse_arch("resnet"), InvalidArgument);
}

TEST(Classifier, InputGradientMatchesFiniteDifferences) {
  for (Arch arch : {Arch::Linear, Arch::SmallCnn}) {
    const auto m = make_classifier(arch, 1, 4, 4, 3, 7, 2);
    Rng rng(2);
    const auto x = random_images(rng, {2, 1, 4, 4});
    const std::vector<int> y = {1, 2};
    Tensor<double> dx;
    m.loss_input_grad(x, y, &dx);
    auto f = [&](std::span<const double> v) {
      return cls_loss<double>(m.logits(Tensor<double>(x.shape(), std::vector<double>(v.begin(), v.end()))), y);
    };
    const auto numeric = fd_gradient(f, x.values(), 1e-5);
    const auto report = compare_gradients(dx.values(), numeric, 1e-5, 1e-4);
    EXPECT_TRUE(report.passed) << arch_name(arch) << " err " << report.max_rel_err;
  }
}

TEST(Classifier, ParameterGradientMatchesFiniteDifferences) {
  for (Arch arch : {Arch::Linear, Arch::SmallCnn}) {
    const auto m = make_classifier(arch, 1, 4, 4, 3, 9, 2);
    Rng rng(3);
    const auto x = random_images(rng, {3, 1, 4, 4});
    const std::vector<int> y = {0, 1, 2};
    ParamSet<double> grad = zeros_like<double>(m.params());
    m.loss_param_grad(m.params(), x, y, grad);
    auto f = [&](std::span<const double> v) {
      const auto p = unflatten_params(v, m.params());
      return cls_loss<double>(m.logits(p, x), y);
    };
    const auto numeric = fd_gradient(f, flatten_params(m.params()), 1e-5);
    const auto report = compare_gradients(flatten_params(grad), numeric, 1e-5, 1e-4);
    EXPECT_TRUE(report.passed) << arch_name(arch) << " err " << report.max_rel_err;
  }
}

GeneratorSpec small_generator() { return {1, 4, 4, 4, 0.01}; }

TEST(Generator, OutputShapeMatchesInput) {
  const MetaNoiseGenerator gen({3, 6, 5, 8, 0.01}, 1);
  Rng rng(4);
  const auto x = random_images(rng, {2, 3, 6, 5});
  const auto z = sample_noise(x.shape(), rng);
  const auto g = gen.forward<double>(gen.params(), z, x, nullptr);
  EXPECT_EQ(g.shape(), x.shape());
  EXPECT_EQ(g, gen.forward<double>(gen.params(), z, x, nullptr));
}

TEST(Generator, ZeroBallReturnsInput) {
  const MetaNoiseGenerator gen(small_generator(), 2);
  Rng rng(5);
  const auto x = random_images(rng, {2, 1, 4, 4});
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::Linf}) {
    EXPECT_EQ(generate_augmented(gen, x, {p, 0.0}, rng), x);
  }
}

TEST(Generator, ZeroOutputReturnsInput) {
  MetaNoiseGenerator gen(small_generator(), 3);
  gen.zero_output();
  Rng rng(6);
  const auto x = random_images(rng, {2, 1, 4, 4});
  EXPECT_EQ(generate_augmented(gen, x, {NormKind::Linf, 0.1}, rng), x);
}

TEST(Generator, AugmentationStaysInBallAndRange) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const MetaNoiseGenerator gen({3, 8, 8, 4, 0.01}, 100 + trial);
    const auto x = random_images(rng, {2, 3, 8, 8});
    for (auto [p, eps] : {std::pair{NormKind::Linf, 8.0 / 255.0}, std::pair{NormKind::L2, 0.5},
                          std::pair{NormKind::L1, 2.0}}) {
      const auto out = generate_augmented(gen, x, {p, eps}, rng);
      for (double n : ball_norm(x, out, p)) ASSERT_LE(n, eps + 1e-6);
      for (double v : out.values()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    }
  }
}

TEST(Generator, RejectsShapeMismatch) {
  const MetaNoiseGenerator gen(small_generator(), 1);
  Rng rng(8);
  const auto x = random_images(rng, {2, 1, 4, 4});
  const auto z = sample_noise({2, 1, 4, 5}, rng);
  EXPECT_THROW(gen.forward<double>(gen.params(), z, x, nullptr), InvalidArgument);
}

// d/dphi <w, x_aug(phi)> through the generator, projection and clamp. Draws
// of z that put a coordinate near a projection kink are replaced.
TEST(Generator, PhiGradientMatchesFiniteDifferences) {
  Rng rng(9);
  for (NormKind p : {NormKind::Linf, NormKind::L2, NormKind::L1}) {
    const double eps = p == NormKind::Linf ? 0.05 : (p == NormKind::L2 ? 0.1 : 0.3);
    const NormBallSpec ball{p, eps};
    const MetaNoiseGenerator gen(small_generator(), 11);
    const auto x = random_images(rng, {2, 1, 4, 4}, 0.3, 0.7);
    Tensor<double> w(x.shape());
    for (auto& v : w.values()) v = rng.uniform(-1.0, 1.0);

    Tensor<double> z;
    AugmentTape<double> tape;
    for (int attempt = 0;; ++attempt) {
      ASSERT_LT(attempt, 20);
      z = sample_noise(x.shape(), rng);
      augment_forward<double>(gen, gen.params(), z, x, ball, &tape);
      bool near_kink = false;
      for (std::size_t s = 0; s < 2 && p == NormKind::Linf; ++s) {
        for (double v : tape.noise.sample(s)) near_kink |= std::abs(std::abs(v) - eps) < 1e-4;
      }
      if (!near_kink) break;
    }

    ParamSet<double> grad = zeros_like<double>(gen.params());
    augment_backward<double>(gen, gen.params(), tape, ball, w, grad);
    auto f = [&](std::span<const double> v) {
      const auto phi = unflatten_params(v, gen.params());
      const auto out = augment_forward<double>(gen, phi, z, x, ball, nullptr);
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += w[i] * out[i];
      return s;
    };
    auto numeric = fd_gradient(f, flatten_params(gen.params()), 1e-6);
    auto analytic = flatten_params(grad);
    // Coordinates outside the active set are exactly zero; their central
    // differences carry only roundoff.
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      if (std::abs(numeric[i]) < 1e-7 && std::abs(analytic[i]) < 1e-7) numeric[i] = analytic[i] = 0.0;
    }
    const auto report = compare_gradients(analytic, numeric, 1e-6, 1e-3);
    EXPECT_TRUE(report.passed) << norm_name(p) << " err " << report.max_rel_err << " analytic "
                               << analytic[report.worst_index] << " numeric "
                               << numeric[report.worst_index];
  }
}

TEST(Dual, ForwardTangentMatchesDirectionalDerivative) {
  const auto m = make_classifier(Arch::SmallCnn, 1, 4, 4, 3, 13, 2);
  Rng rng(10);
  const auto x = random_images(rng, {1, 1, 4, 4});
  ParamSet<double> dir = zeros_like<double>(m.params());
  for (auto& t : dir) {
    for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
  }
  const auto dual = to_dual(m.params(), dir);
  const auto out = m.net().forward<Dual>(dual, to_dual(x), nullptr);
  const double h = 1e-6;
  auto shifted = [&](double s) {
    ParamSet<double> p = m.params();
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = 0; j < p[i].size(); ++j) p[i][j] += s * dir[i][j];
    }
    return m.logits(p, x);
  };
  const auto plus = shifted(h), minus = shifted(-h);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_NEAR(out[i].t, (plus[i] - minus[i]) / (2 * h), 1e-6);
  }
}

}  // namespace
}  // namespace mngac
