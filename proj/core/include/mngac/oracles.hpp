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

#include <functional>
#include <span>
#include <vector>

namespace mngac {

using ScalarFn = std::function<double(std::span<const double>)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double step_size = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double a, double b);

/// Coordinatewise maximum relative error between two gradients.
GradCheckReport compare_gradients(std::span<const double> analytic, std::span<const double> numeric, double h,
                                  double tolerance);

/// Central-difference gradient of `f` at `params`.
std::vector<double> fd_gradient(const ScalarFn& f, std::span<const double> params, double h);

/// Gradient of a (theta, phi) -> scalar training loss with respect to theta.
using TrainGradFn = std::function<std::vector<double>(std::span<const double>, std::span<const double>)>;
using TrainLossFn = std::function<double(std::span<const double>, std::span<const double>)>;

/// Central differences of phi -> eval_loss(theta - meta_lr * train_grad(theta, phi)).
std::vector<double> fd_hypergradient(const TrainGradFn& train_grad, const ScalarFn& eval_loss,
                                     std::span<const double> theta, std::span<const double> phi, double meta_lr,
                                     double h);

/// Same, with the inner gradient itself taken by central differences of
/// `train_loss` (step `h`).
std::vector<double> fd_hypergradient(const TrainLossFn& train_loss, const ScalarFn& eval_loss,
                                     std::span<const double> theta, std::span<const double> phi, double meta_lr,
                                     double h, double inner_h);

/// Euclidean projection onto the L1 ball of radius `epsilon` by bisection on
/// the soft threshold tau solving sum(max(|v| - tau, 0)) = epsilon.
std::vector<double> l1_projection_oracle(std::span<const double> point, double epsilon);

}  // namespace mngac
