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

#include <cmath>
#include <cstring>

namespace mngac {

NormKind parse_norm(std::string_view name) {
  if (name == "l1" || name == "L1") return NormKind::L1;
  if (name == "l2" || name == "L2") return NormKind::L2;
  if (name == "linf" || name == "Linf" || name == "LINF") return NormKind::Linf;
  throw InvalidArgument("unknown norm '" + std::string(name) + "' (expected l1, l2 or linf)");
}

std::string norm_name(NormKind p) {
  switch (p) {
    case NormKind::L1:
      return "l1";
    case NormKind::L2:
      return "l2";
    case NormKind::Linf:
      return "linf";
  }
  return "?";
}

std::vector<double> ball_norm(const Tensor<double>& center, const Tensor<double>& point, NormKind p) {
  require_same_shape(center, point, "ball_norm");
  std::vector<double> out(center.batch());
  std::vector<double> delta(center.sample_size());
  for (std::size_t b = 0; b < center.batch(); ++b) {
    auto c = center.sample(b);
    auto x = point.sample(b);
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = x[i] - c[i];
    out[b] = detail::lp_norm<double>(delta, p);
  }
  return out;
}

Tensor<double> project_ball(const Tensor<double>& center, const Tensor<double>& point, const NormBallSpec& ball) {
  require_same_shape(center, point, "project_ball");
  require_finite(center.values(), "project_ball center");
  require_finite(point.values(), "project_ball point");
  if (ball.epsilon < 0.0 || !std::isfinite(ball.epsilon)) {
    throw InvalidArgument("project_ball: epsilon must be finite and >= 0");
  }
  Tensor<double> out(point.shape());
  const std::size_t n = point.sample_size();
  std::vector<double> delta(n);
  for (std::size_t b = 0; b < point.batch(); ++b) {
    auto c = center.sample(b);
    auto x = point.sample(b);
    auto r = out.sample(b);
    for (std::size_t i = 0; i < n; ++i) delta[i] = x[i] - c[i];
    if (detail::lp_norm<double>(delta, ball.p) <= ball.epsilon) {
      std::memcpy(r.data(), x.data(), n * sizeof(double));
      continue;
    }
    project_delta<double>(delta, ball.p, ball.epsilon);
    for (std::size_t i = 0; i < n; ++i) r[i] = c[i] + delta[i];
  }
  return out;
}

std::size_t sparse_step_count(std::size_t size, double sparsity_fraction) {
  if (!(sparsity_fraction > 0.0 && sparsity_fraction <= 1.0)) {
    throw InvalidArgument("sparsity_fraction must lie in (0, 1]");
  }
  const auto k = static_cast<std::size_t>(std::floor(sparsity_fraction * static_cast<double>(size) + 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(size, 1));
}

Tensor<double> steepest_direction(const Tensor<double>& gradient, NormKind p, double sparsity_fraction) {
  require_finite(gradient.values(), "steepest_direction");
  Tensor<double> out(gradient.shape());
  const std::size_t n = gradient.sample_size();
  std::vector<std::size_t> order(n);
  for (std::size_t b = 0; b < gradient.batch(); ++b) {
    auto g = gradient.sample(b);
    auto d = out.sample(b);
    switch (p) {
      case NormKind::Linf:
        for (std::size_t i = 0; i < n; ++i) d[i] = detail::sign_of(g[i]);
        break;
      case NormKind::L2: {
        const double norm = detail::lp_norm<double>(g, NormKind::L2);
        if (norm > 0.0) {
          for (std::size_t i = 0; i < n; ++i) d[i] = g[i] / norm;
        }
        break;
      }
      case NormKind::L1: {
        const std::size_t k = sparse_step_count(n, sparsity_fraction);
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Largest magnitude first; equal magnitudes keep the lower flat index.
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [&](std::size_t a, std::size_t c) {
                            const double ma = std::abs(g[a]);
                            const double mc = std::abs(g[c]);
                            return ma > mc || (ma == mc && a < c);
                          });
        std::size_t moved = 0;
        for (std::size_t j = 0; j < k; ++j) moved += g[order[j]] != 0.0;
        if (moved == 0) break;
        for (std::size_t j = 0; j < k; ++j) {
          d[order[j]] = detail::sign_of(g[order[j]]) / static_cast<double>(moved);
        }
        break;
      }
    }
  }
  return out;
}

void sample_uniform_ball(std::span<double> out, NormKind p, double epsilon, Rng& rng) {
  const std::size_t n = out.size();
  if (epsilon <= 0.0 || n == 0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  switch (p) {
    case NormKind::Linf:
      for (double& v : out) v = rng.uniform(-epsilon, epsilon);
      return;
    case NormKind::L2: {
      double norm2 = 0.0;
      for (double& v : out) {
        v = rng.normal();
        norm2 += v * v;
      }
      const double radius = epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
      const double scale = norm2 > 0.0 ? radius / std::sqrt(norm2) : 0.0;
      for (double& v : out) v *= scale;
      return;
    }
    case NormKind::L1: {
      // n+1 exponentials normalized give a uniform point of the open simplex;
      // dropping the slack coordinate and attaching signs fills the L1 ball.
      double total = 0.0;
      for (double& v : out) {
        v = rng.exponential();
        total += v;
      }
      total += rng.exponential();
      for (double& v : out) v = epsilon * v / total * (rng.coin() ? 1.0 : -1.0);
      return;
    }
  }
}

}  // namespace mngac
