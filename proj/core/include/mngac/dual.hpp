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

#include <cmath>

namespace mngac {

/// Forward-mode dual number carrying a value and one directional derivative.
///
/// Running the reverse-mode kernels with `Dual` scalars yields
/// Hessian-vector products (forward-over-reverse). Comparisons look only at
/// the value, so piecewise operations (clamp, max, sort) take the branch of
/// the primal computation.
struct Dual {
  double v = 0.0;
  double t = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(double value, double tangent) : v(value), t(tangent) {}

  constexpr Dual& operator+=(const Dual& o) {
    v += o.v;
    t += o.t;
    return *this;
  }
  constexpr Dual& operator-=(const Dual& o) {
    v -= o.v;
    t -= o.t;
    return *this;
  }
  constexpr Dual& operator*=(const Dual& o) {
    t = t * o.v + v * o.t;
    v *= o.v;
    return *this;
  }
  constexpr Dual& operator/=(const Dual& o) {
    t = (t * o.v - v * o.t) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
};

constexpr Dual operator-(const Dual& a) { return {-a.v, -a.t}; }
constexpr Dual operator+(Dual a, const Dual& b) { return a += b; }
constexpr Dual operator-(Dual a, const Dual& b) { return a -= b; }
constexpr Dual operator*(Dual a, const Dual& b) { return a *= b; }
constexpr Dual operator/(Dual a, const Dual& b) { return a /= b; }

constexpr bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
constexpr bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
constexpr bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
constexpr bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
constexpr bool operator==(const Dual& a, const Dual& b) { return a.v == b.v && a.t == b.t; }

inline Dual exp(const Dual& a) {
  const double e = std::exp(a.v);
  return {e, e * a.t};
}
inline Dual log(const Dual& a) { return {std::log(a.v), a.t / a.v}; }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return {s, s > 0.0 ? a.t / (2.0 * s) : 0.0};
}
inline Dual abs(const Dual& a) { return a.v < 0.0 ? -a : a; }

/// Primal value of a scalar, for branching and reporting.
constexpr double value_of(double x) { return x; }
constexpr double value_of(const Dual& x) { return x.v; }

inline bool isfinite(const Dual& a) { return std::isfinite(a.v) && std::isfinite(a.t); }

}  // namespace mngac
