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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mngac/dual.hpp"
#include "mngac/rng.hpp"
#include "mngac/tensor.hpp"

namespace mngac {

enum class NormKind { L1, L2, Linf };

NormKind parse_norm(std::string_view name);
std::string norm_name(NormKind p);

/// The ball B(center, epsilon) under the p-norm. Epsilon is in pixel units.
struct NormBallSpec {
  NormKind p = NormKind::Linf;
  double epsilon = 0.0;

  bool operator==(const NormBallSpec&) const = default;
};

/// Per-sample ||point - center||_p over all non-batch dimensions.
std::vector<double> ball_norm(const Tensor<double>& center, const Tensor<double>& point, NormKind p);

/// Euclidean-nearest point of B(center, eps) to `point`, sample by sample.
/// Samples already inside the ball are returned bit-identically.
Tensor<double> project_ball(const Tensor<double>& center, const Tensor<double>& point, const NormBallSpec& ball);

/// Unit-p-norm direction maximizing <v, gradient>, sample by sample. For L1
/// only the top `sparsity_fraction` of coordinates by |gradient| move.
Tensor<double> steepest_direction(const Tensor<double>& gradient, NormKind p, double sparsity_fraction = 0.01);

/// Number of coordinates moved by the sparse L1 step for `size` coordinates.
std::size_t sparse_step_count(std::size_t size, double sparsity_fraction);

/// Fills `out` with a uniform draw from the radius-eps p-ball centered at 0.
void sample_uniform_ball(std::span<double> out, NormKind p, double epsilon, Rng& rng);

// Templated delta projections. These run on `double` for attacks and on
// `Dual` for meta-gradients, so they are written against generic scalars.

namespace detail {

template <class T>
T abs_of(const T& x) {
  using std::abs;
  return abs(x);
}

template <class T>
T sign_of(const T& x) {
  if (value_of(x) > 0.0) return T(1.0);
  if (value_of(x) < 0.0) return T(-1.0);
  return T(0.0);
}

/// Soft threshold tau for projecting onto the L1 ball of radius eps, assuming
/// ||delta||_1 > eps. Sort-based: O(d log d).
template <class T>
T l1_threshold(std::span<const T> delta, double eps, std::size_t* active = nullptr) {
  std::vector<T> mags(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) mags[i] = abs_of(delta[i]);
  std::sort(mags.begin(), mags.end(), [](const T& a, const T& b) { return value_of(a) > value_of(b); });
  T running(0.0);
  T tau(0.0);
  std::size_t rho = 0;
  for (std::size_t j = 0; j < mags.size(); ++j) {
    running += mags[j];
    const T candidate = (running - T(eps)) / T(static_cast<double>(j + 1));
    if (value_of(mags[j]) - value_of(candidate) > 0.0) {
      rho = j + 1;
      tau = candidate;
    }
  }
  if (active) *active = rho;
  return tau;
}

template <class T>
T lp_norm(std::span<const T> delta, NormKind p) {
  T acc(0.0);
  switch (p) {
    case NormKind::L1:
      for (const T& d : delta) acc += abs_of(d);
      return acc;
    case NormKind::L2:
      for (const T& d : delta) acc += d * d;
      {
        using std::sqrt;
        return sqrt(acc);
      }
    case NormKind::Linf:
      for (const T& d : delta) {
        const T a = abs_of(d);
        if (value_of(a) > value_of(acc)) acc = a;
      }
      return acc;
  }
  return acc;
}

}  // namespace detail

/// Projects one sample's delta onto the radius-eps p-ball centered at 0, in place.
template <class T>
void project_delta(std::span<T> delta, NormKind p, double eps) {
  if (eps <= 0.0) {
    std::fill(delta.begin(), delta.end(), T(0.0));
    return;
  }
  switch (p) {
    case NormKind::Linf:
      for (T& d : delta) {
        if (value_of(d) > eps) d = T(eps);
        if (value_of(d) < -eps) d = T(-eps);
      }
      return;
    case NormKind::L2: {
      const T n = detail::lp_norm<T>(delta, p);
      if (value_of(n) <= eps) return;
      const T scale = T(eps) / n;
      for (T& d : delta) d *= scale;
      return;
    }
    case NormKind::L1: {
      if (value_of(detail::lp_norm<T>(delta, p)) <= eps) return;
      const T tau = detail::l1_threshold<T>(delta, eps);
      for (T& d : delta) {
        const T shrunk = detail::abs_of(d) - tau;
        d = value_of(shrunk) > 0.0 ? detail::sign_of(d) * shrunk : T(0.0);
      }
      return;
    }
  }
}

/// Vector-Jacobian product of project_delta at the pre-projection delta.
/// `grad` holds dL/d(projected) on entry and dL/d(delta) on exit.
template <class T>
void project_delta_vjp(std::span<const T> delta, NormKind p, double eps, std::span<T> grad) {
  if (eps <= 0.0) {
    std::fill(grad.begin(), grad.end(), T(0.0));
    return;
  }
  switch (p) {
    case NormKind::Linf:
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (std::abs(value_of(delta[i])) > eps) grad[i] = T(0.0);
      }
      return;
    case NormKind::L2: {
      const T n = detail::lp_norm<T>(delta, p);
      if (value_of(n) <= eps) return;
      T dot(0.0);
      for (std::size_t i = 0; i < delta.size(); ++i) dot += delta[i] * grad[i];
      const T scale = T(eps) / n;
      const T radial = dot / (n * n);
      for (std::size_t i = 0; i < delta.size(); ++i) grad[i] = scale * (grad[i] - delta[i] * radial);
      return;
    }
    case NormKind::L1: {
      if (value_of(detail::lp_norm<T>(delta, p)) <= eps) return;
      std::size_t active = 0;
      const T tau = detail::l1_threshold<T>(delta, eps, &active);
      T signed_sum(0.0);
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (std::abs(value_of(delta[i])) > value_of(tau)) signed_sum += detail::sign_of(delta[i]) * grad[i];
      }
      const T mean = active ? signed_sum / T(static_cast<double>(active)) : T(0.0);
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (std::abs(value_of(delta[i])) > value_of(tau)) {
          grad[i] = grad[i] - detail::sign_of(delta[i]) * mean;
        } else {
          grad[i] = T(0.0);
        }
      }
      return;
    }
  }
}

}  // namespace mngac
