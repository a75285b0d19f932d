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

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mngac/models.hpp"
#include "mngac/normball.hpp"
#include "mngac/rng.hpp"

namespace mngac {

enum class AttackKind { Pgd, SaltPepper };

/// One attack configuration. PGD fields apply to `Pgd`; `max_fraction` and
/// `trials` apply to `SaltPepper`.
struct AttackSpec {
  std::string name;
  AttackKind kind = AttackKind::Pgd;
  NormBallSpec ball;
  int steps = 10;
  double step_size = 0.004;
  bool random_init = true;
  double sparsity = 0.01;
  double max_fraction = 0.05;
  int trials = 10;

  /// Throws InvalidArgument if the fields violate the attack's constraints.
  void validate() const;
  bool operator==(const AttackSpec&) const = default;
};

/// Names accepted by `default_attack`.
const std::vector<std::string>& attack_names();

/// Registry lookup: "pgd-linf", "pgd-l1", "pgd-l2" or "salt-pepper" with
/// budgets scaled to `input_size` values per example. At 3*32*32 the budgets
/// are eps = 8/255, 2000/255, 128/255 with step sizes 0.004, 1.0, 0.1.
/// `training` selects 20 L1 steps instead of the 100 used for evaluation.
AttackSpec default_attack(std::string_view name, std::size_t input_size, bool training = false);

/// Ordered attack list with uniform sampling.
class PerturbationSet {
 public:
  PerturbationSet() = default;
  explicit PerturbationSet(std::vector<AttackSpec> attacks);

  std::size_t size() const { return attacks_.size(); }
  bool empty() const { return attacks_.empty(); }
  const std::vector<AttackSpec>& attacks() const { return attacks_; }
  const AttackSpec& operator[](std::size_t i) const { return attacks_.at(i); }

  /// Index drawn uniformly from [0, size()).
  std::size_t sample_index(Rng& rng) const;
  const AttackSpec& sample(Rng& rng) const { return attacks_[sample_index(rng)]; }

 private:
  std::vector<AttackSpec> attacks_;
};

/// Projected gradient ascent on the cross-entropy inside B(x, eps) and [0,1].
/// The classifier is only read.
Tensor<double> pgd_attack(const Classifier& model, const Tensor<double>& x, std::span<const int> labels,
                          const AttackSpec& spec, Rng& rng);

/// Black-box corruption: random pixel subsets (all channels of a pixel) set
/// to 0 or 1, the fraction doubling per trial up to `max_fraction`. Returns
/// the first corruption that is misclassified, else the original sample.
Tensor<double> salt_pepper_attack(const Classifier& model, const Tensor<double>& x, std::span<const int> labels,
                                  double max_fraction, int trials, Rng& rng);

/// Dispatches on `spec.kind`.
Tensor<double> run_attack(const Classifier& model, const Tensor<double>& x, std::span<const int> labels,
                          const AttackSpec& spec, Rng& rng);

}  // namespace mngac
