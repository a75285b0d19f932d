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

#include "mngac/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mngac/error.hpp"

namespace mngac {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

GradCheckReport compare_gradients(std::span<const double> analytic, std::span<const double> numeric, double h,
                                  double tolerance) {
  if (analytic.size() != numeric.size()) throw InvalidArgument("compare_gradients: length mismatch");
  GradCheckReport report;
  report.step_size = h;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double e = relative_error(analytic[i], numeric[i]);
    if (e > report.max_rel_err || std::isnan(e)) {
      report.max_rel_err = e;
      report.worst_index = i;
    }
  }
  report.passed = report.max_rel_err <= tolerance;
  return report;
}

std::vector<double> fd_gradient(const ScalarFn& f, std::span<const double> params, double h) {
  if (!(h > 0.0)) throw InvalidArgument("fd_gradient: step must be positive");
  std::vector<double> point(params.begin(), params.end());
  std::vector<double> grad(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double up = f(point);
    point[i] = saved - h;
    const double down = f(point);
    point[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("fd_gradient: non-finite function value at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

std::vector<double> fd_hypergradient(const TrainGradFn& train_grad, const ScalarFn& eval_loss,
                                     std::span<const double> theta, std::span<const double> phi, double meta_lr,
                                     double h) {
  const ScalarFn outer = [&](std::span<const double> p) {
    const std::vector<double> g = train_grad(theta, p);
    if (g.size() != theta.size()) throw InvalidArgument("fd_hypergradient: inner gradient has the wrong length");
    std::vector<double> lookahead(theta.begin(), theta.end());
    for (std::size_t i = 0; i < lookahead.size(); ++i) {
      if (!std::isfinite(g[i])) throw NumericError("fd_hypergradient: non-finite inner gradient");
      lookahead[i] -= meta_lr * g[i];
    }
    return eval_loss(lookahead);
  };
  return fd_gradient(outer, phi, h);
}

std::vector<double> fd_hypergradient(const TrainLossFn& train_loss, const ScalarFn& eval_loss,
                                     std::span<const double> theta, std::span<const double> phi, double meta_lr,
                                     double h, double inner_h) {
  const TrainGradFn inner = [&](std::span<const double> t, std::span<const double> p) {
    return fd_gradient([&](std::span<const double> tt) { return train_loss(tt, p); }, t, inner_h);
  };
  return fd_hypergradient(inner, eval_loss, theta, phi, meta_lr, h);
}

std::vector<double> l1_projection_oracle(std::span<const double> point, double epsilon) {
  std::vector<double> out(point.begin(), point.end());
  double norm = 0.0;
  double top = 0.0;
  for (double v : point) {
    norm += std::abs(v);
    top = std::max(top, std::abs(v));
  }
  if (norm <= epsilon) return out;
  if (epsilon <= 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  // mass(tau) = sum(max(|v| - tau, 0)) decreases from ||v||_1 at 0 to 0 at max|v|.
  auto mass = [&](double tau) {
    double m = 0.0;
    for (double v : point) m += std::max(std::abs(v) - tau, 0.0);
    return m;
  };
  double lo = 0.0, hi = top;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (mass(mid) > epsilon ? lo : hi) = mid;
  }
  const double tau = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double shrunk = std::max(std::abs(point[i]) - tau, 0.0);
    out[i] = point[i] < 0.0 ? -shrunk : shrunk;
  }
  return out;
}

}  // namespace mngac
