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
#include <vector>

#include "mngac/tensor.hpp"

namespace mngac {

/// Floor applied to probabilities before taking logarithms.
inline constexpr double kProbabilityFloor = 1e-12;

/// Mean cross-entropy of `logits` (batch x classes) against `labels`,
/// via a max-shifted log-sum-exp. Writes dLoss/dLogits when `grad` is set.
template <class T>
T cls_loss(const Tensor<T>& logits, std::span<const int> labels, Tensor<T>* grad = nullptr);

/// Cross-entropy of each example (no batch reduction).
std::vector<double> cls_loss_per_example(const Tensor<double>& logits, std::span<const int> labels);

/// Row-wise softmax of a (batch x classes) tensor.
Tensor<double> softmax(const Tensor<double>& logits);

/// Clean, adversarial and noise-augmented posteriors for the same examples.
struct PosteriorTriple {
  Tensor<double> p_clean;
  Tensor<double> p_adv;
  Tensor<double> p_aug;
};

/// Throws InvalidArgument unless all three tensors share a (batch x classes)
/// shape with nonnegative rows summing to 1 within 1e-5.
void validate(const PosteriorTriple& t);

/// Jensen-Shannon divergence among the three posteriors, natural log, averaged
/// over the batch. Lies in [0, ln 3].
double ac_loss(const PosteriorTriple& t);

/// The same divergence computed from logits, with gradients with respect to
/// each logit tensor (any pointer may be null).
double ac_loss_from_logits(const Tensor<double>& clean, const Tensor<double>& adv, const Tensor<double>& aug,
                           Tensor<double>* d_clean, Tensor<double>* d_adv, Tensor<double>* d_aug);

/// cls + beta * ac. Rejects negative beta.
double total_loss(double cls, double ac, double beta);

/// Fraction of rows whose argmax equals the label.
double accuracy(const Tensor<double>& logits, std::span<const int> labels);
/// Argmax of each row (lowest index on ties).
std::vector<int> predictions(const Tensor<double>& logits);

}  // namespace mngac
