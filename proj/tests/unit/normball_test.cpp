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

#include "mngac/normball.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mngac/error.hpp"
#include "mngac/oracles.hpp"
#include "mngac/rng.hpp"

namespace mngac {
namespace {

Tensor<double> row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>({1, n}, std::move(v));
}

Tensor<double> random_batch(Rng& rng, std::size_t batch, std::size_t dim, double scale) {
  Tensor<double> t({batch, dim});
  for (auto& v : t.values()) v = scale * rng.uniform(-1.0, 1.0);
  return t;
}

TEST(ProjectBall, LinfClampsOnlyTheOffendingCoordinate) {
  const Tensor<double> center({1, 3}, 0.0);
  const auto r = project_ball(center, row({0.2, 0.05, -0.03}), {NormKind::Linf, 0.1});
  EXPECT_DOUBLE_EQ(r[0], 0.1);
  EXPECT_DOUBLE_EQ(r[1], 0.05);
  EXPECT_DOUBLE_EQ(r[2], -0.03);
}

TEST(ProjectBall, L2RescalesRadially) {
  const auto r = project_ball(Tensor<double>({1, 2}, 0.0), row({0.3, 0.4}), {NormKind::L2, 0.25});
  EXPECT_NEAR(r[0], 0.15, 1e-12);
  EXPECT_NEAR(r[1], 0.2, 1e-12);
}

TEST(ProjectBall, L1DiagonalPointMatchesClosedFormAndOracles) {
  const auto r = project_ball(Tensor<double>({1, 2}, 0.0), row({0.6, 0.6}), {NormKind::L1, 0.6});
  EXPECT_NEAR(r[0], 0.3, 1e-12);
  EXPECT_NEAR(r[1], 0.3, 1e-12);

  const std::vector<double> point = {0.6, 0.6};
  const auto bisect = l1_projection_oracle(point, 0.6);
  EXPECT_NEAR(bisect[0], 0.3, 1e-9);
  EXPECT_NEAR(bisect[1], 0.3, 1e-9);

  // Exhaustive search over a fine grid of the ball's boundary and interior.
  double best = std::numeric_limits<double>::infinity();
  double bx = 0.0, by = 0.0;
  const int n = 600;
  for (int i = -n; i <= n; ++i) {
    for (int j = -n; j <= n; ++j) {
      const double x = 0.6 * i / n, y = 0.6 * j / n;
      if (std::abs(x) + std::abs(y) > 0.6 + 1e-12) continue;
      const double d = (x - 0.6) * (x - 0.6) + (y - 0.6) * (y - 0.6);
      if (d < best) best = d, bx = x, by = y;
    }
  }
  EXPECT_NEAR(bx, 0.3, 1e-3);
  EXPECT_NEAR(by, 0.3, 1e-3);
}

TEST(ProjectBall, ShapeMismatchAndNonFiniteInputsAreRejected) {
  EXPECT_THROW(project_ball(Tensor<double>({1, 2}), Tensor<double>({1, 3}), {NormKind::L2, 1.0}), InvalidArgument);
  EXPECT_THROW(project_ball(Tensor<double>({1, 2}), row({std::nan(""), 0.0}), {NormKind::L2, 1.0}), NumericError);
}

TEST(ProjectBall, FeasibleIdempotentAndInteriorFixed) {
  Rng rng(7);
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::Linf}) {
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t dim = 1 + rng.index(40);
      const double eps = rng.uniform(0.01, 1.0);
      const auto center = random_batch(rng, 4, dim, 1.0);
      auto point = random_batch(rng, 4, dim, 2.0);
      for (std::size_t i = 0; i < point.size(); ++i) point[i] += center[i];
      const NormBallSpec ball{p, eps};
      const auto once = project_ball(center, point, ball);
      for (double n : ball_norm(center, once, p)) EXPECT_LE(n, eps * (1.0 + 1e-6));
      const auto twice = project_ball(center, once, ball);
      for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(twice[i], once[i], 1e-7);

      auto inside = center;
      std::vector<double> delta(dim);
      sample_uniform_ball(delta, p, eps, rng);
      for (std::size_t i = 0; i < dim; ++i) inside[i] += delta[i];
      const auto kept = project_ball(center, inside, ball);
      for (std::size_t i = 0; i < dim; ++i) EXPECT_EQ(kept[i], inside[i]);
    }
  }
}

TEST(ProjectBall, SortedL1MatchesBisectionOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t dim = 1 + rng.index(8);
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    const double eps = rng.uniform(0.05, 2.0);
    const auto expected = l1_projection_oracle(v, eps);
    const auto got = project_ball(Tensor<double>({1, dim}, 0.0), row(v), {NormKind::L1, eps});
    for (std::size_t i = 0; i < dim; ++i) ASSERT_NEAR(got[i], expected[i], 1e-6) << "trial " << trial;
  }
}

// Minimizes ||r - v||^2 over the L1 ball by projected gradient descent with
// the bisection oracle, from many starts; dimension <= 6.
TEST(ProjectBall, SortedL1MatchesQuadraticMinimization) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dim = 1 + rng.index(6);
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    const double eps = rng.uniform(0.05, 1.0);
    const auto got = project_ball(Tensor<double>({1, dim}, 0.0), row(v), {NormKind::L1, eps});

    // Any feasible point must be no closer to v than the projection.
    double got_dist = 0.0;
    for (std::size_t i = 0; i < dim; ++i) got_dist += (got[i] - v[i]) * (got[i] - v[i]);
    for (int k = 0; k < 2000; ++k) {
      std::vector<double> q(dim);
      sample_uniform_ball(q, NormKind::L1, eps, rng);
      double d = 0.0;
      for (std::size_t i = 0; i < dim; ++i) d += (q[i] - v[i]) * (q[i] - v[i]);
      ASSERT_GE(d, got_dist - 1e-12);
    }
    // Optimality: r = sign(v) * max(|v| - tau, 0) with a common tau.
    double tau = -1.0;
    for (std::size_t i = 0; i < dim; ++i) {
      if (got[i] != 0.0) {
        const double t = std::abs(v[i]) - std::abs(got[i]);
        if (tau < 0.0) tau = t;
        EXPECT_NEAR(t, tau, 1e-5);
        EXPECT_EQ(std::signbit(got[i]), std::signbit(v[i]));
      }
    }
    if (tau >= 0.0) {
      for (std::size_t i = 0; i < dim; ++i) {
        if (got[i] == 0.0) EXPECT_LE(std::abs(v[i]), tau + 1e-5);
      }
    }
  }
}

TEST(SteepestDirection, L2Normalizes) {
  const auto d = steepest_direction(row({3.0, -4.0}), NormKind::L2);
  EXPECT_NEAR(d[0], 0.6, 1e-12);
  EXPECT_NEAR(d[1], -0.8, 1e-12);
}

TEST(SteepestDirection, LinfTakesSigns) {
  const auto d = steepest_direction(row({3.0, -4.0}), NormKind::Linf);
  EXPECT_EQ(d[0], 1.0);
  EXPECT_EQ(d[1], -1.0);
}

TEST(SteepestDirection, SparseL1MatchesBruteForceOverOneSparseVectors) {
  const std::vector<double> g = {3.0, -4.0, 0.1};
  const auto d = steepest_direction(row(g), NormKind::L1, 1.0 / 3.0);
  ASSERT_EQ(sparse_step_count(3, 1.0 / 3.0), 1u);
  // Brute force: +-e_i, keep the best inner product.
  double best = -1.0;
  std::vector<double> arg(3, 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (double s : {1.0, -1.0}) {
      if (s * g[i] > best) {
        best = s * g[i];
        arg.assign(3, 0.0);
        arg[i] = s;
      }
    }
  }
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(d[i], arg[i]);
  EXPECT_EQ(d[1], -1.0);
}

TEST(SteepestDirection, SparseL1BreaksTiesByLowestIndexAndKeepsOneCoordinate) {
  const auto d = steepest_direction(row({2.0, -2.0, 2.0, 0.0}), NormKind::L1, 0.25);
  EXPECT_EQ(d[0], 1.0);
  EXPECT_EQ(d[1], 0.0);
  EXPECT_EQ(d[2], 0.0);
  EXPECT_EQ(sparse_step_count(1000, 1e-9), 1u);
}

TEST(SteepestDirection, ZeroGradientGivesZero) {
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::Linf}) {
    const auto d = steepest_direction(Tensor<double>({2, 5}, 0.0), p);
    for (double v : d.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(SteepestDirection, UnitNormAndDualNormIdentity) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = random_batch(rng, 1, 1 + rng.index(30), 3.0);
    const Tensor<double> zero(g.shape(), 0.0);
    double l1 = 0.0, l2 = 0.0;
    for (double v : g.values()) l1 += std::abs(v), l2 += v * v;
    l2 = std::sqrt(l2);

    const auto d2 = steepest_direction(g, NormKind::L2);
    const auto dinf = steepest_direction(g, NormKind::Linf);
    EXPECT_NEAR(ball_norm(zero, d2, NormKind::L2)[0], 1.0, 1e-12);
    EXPECT_NEAR(ball_norm(zero, dinf, NormKind::Linf)[0], 1.0, 1e-12);
    double ip2 = 0.0, ipinf = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) ip2 += d2[i] * g[i], ipinf += dinf[i] * g[i];
    EXPECT_NEAR(ip2, l2, 1e-6);      // dual of L2 is L2
    EXPECT_NEAR(ipinf, l1, 1e-6);    // dual of Linf is L1

    const auto d1 = steepest_direction(g, NormKind::L1, 0.2);
    EXPECT_NEAR(ball_norm(zero, d1, NormKind::L1)[0], 1.0, 1e-12);
  }
}

TEST(BallNorm, Examples) {
  const auto a = row({0.1, 0.2});
  EXPECT_EQ(ball_norm(a, a, NormKind::L2)[0], 0.0);
  const Tensor<double> zero({1, 2}, 0.0);
  const auto d = row({0.3, -0.4});
  EXPECT_NEAR(ball_norm(zero, d, NormKind::L1)[0], 0.7, 1e-12);
  EXPECT_NEAR(ball_norm(zero, d, NormKind::Linf)[0], 0.4, 1e-12);
  EXPECT_NEAR(ball_norm(zero, d, NormKind::L2)[0], 0.5, 1e-12);
}

TEST(BallNorm, NamesRoundTrip) {
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::Linf}) EXPECT_EQ(parse_norm(norm_name(p)), p);
  EXPECT_THROW(parse_norm("l3"), InvalidArgument);
}

TEST(SampleUniformBall, DrawsStayInsideAndFillTheBall) {
  Rng rng(9);
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::Linf}) {
    std::vector<double> v(16);
    double max_norm = 0.0;
    for (int k = 0; k < 2000; ++k) {
      sample_uniform_ball(v, p, 0.5, rng);
      const double n = detail::lp_norm<double>(v, p);
      EXPECT_LE(n, 0.5 * (1 + 1e-12));
      max_norm = std::max(max_norm, n);
    }
    // In 16 dimensions most of the volume sits near the boundary.
    EXPECT_GT(max_norm, 0.45);
  }
}

// The vector-Jacobian product of the delta projection agrees with central
// differences away from kinks.
TEST(ProjectDeltaVjp, MatchesFiniteDifferences) {
  Rng rng(21);
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::Linf}) {
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t dim = 2 + rng.index(6);
      std::vector<double> delta(dim), w(dim);
      for (auto& x : delta) x = rng.uniform(-1.0, 1.0);
      for (auto& x : w) x = rng.uniform(-1.0, 1.0);
      const double eps = 0.4;
      auto f = [&](std::span<const double> d) {
        std::vector<double> c(d.begin(), d.end());
        project_delta<double>(c, p, eps);
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) s += w[i] * c[i];
        return s;
      };
      const auto numeric = fd_gradient(f, delta, 1e-7);
      std::vector<double> grad = w;
      project_delta_vjp<double>(delta, p, eps, grad);
      for (std::size_t i = 0; i < dim; ++i) EXPECT_NEAR(grad[i], numeric[i], 1e-5);
    }
  }
}

}  // namespace
}  // namespace mngac
