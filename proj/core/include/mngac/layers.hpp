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

#include <cstddef>
#include <span>
#include <vector>

#include "mngac/rng.hpp"
#include "mngac/tensor.hpp"

namespace mngac {

/// Parameters of a network as an ordered list of arrays.
template <class T>
using ParamSet = std::vector<Tensor<T>>;

std::size_t parameter_count(const ParamSet<double>& params);
std::uint64_t parameter_hash(const ParamSet<double>& params);
/// All values, array after array.
std::vector<double> flatten_params(const ParamSet<double>& params);
/// Inverse of flatten_params onto arrays shaped like `like`.
ParamSet<double> unflatten_params(std::span<const double> flat, const ParamSet<double>& like);
/// Zero-filled arrays with the same shapes as `like`.
template <class T, class U>
ParamSet<T> zeros_like(const ParamSet<U>& like) {
  ParamSet<T> out;
  out.reserve(like.size());
  for (const auto& p : like) out.emplace_back(p.shape());
  return out;
}

enum class LayerKind { Conv, Dense, Relu, LeakyRelu, AvgPool2, Flatten, Affine };

struct LayerSpec {
  LayerKind kind;
  Shape in;   // per-sample input shape
  Shape out;  // per-sample output shape
  std::size_t kernel = 0;
  double slope = 0.0;  // LeakyRelu slope, Affine scale
  double shift = 0.0;
};

/// Per-layer inputs recorded during a forward pass.
template <class T>
struct Tape {
  std::vector<Tensor<T>> inputs;
};

/// Feed-forward stack of layers whose parameters live outside the object.
///
/// Keeping parameters separate lets the same architecture run with the
/// trained weights, a temporary lookahead copy, or dual-number weights for
/// second-order products.
class Sequential {
 public:
  explicit Sequential(Shape input_shape);

  /// Same-padding convolution with a square kernel of size 1 or 3.
  Sequential& conv(std::size_t out_channels, std::size_t kernel = 3);
  Sequential& dense(std::size_t out_features);
  Sequential& relu();
  Sequential& leaky_relu(double slope);
  /// Fixed elementwise y = scale * x + shift.
  Sequential& affine(double scale, double shift);
  Sequential& avg_pool2();
  Sequential& flatten();

  const Shape& input_shape() const { return input_; }
  const Shape& output_shape() const;
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t param_arrays() const;

  /// He-uniform weights, U(-sqrt(6/fan_in), sqrt(6/fan_in)); zero biases.
  ParamSet<double> init(Rng& rng) const;

  template <class T>
  Tensor<T> forward(std::span<const Tensor<T>> params, const Tensor<T>& x, Tape<T>* tape) const;

  /// Back-propagates `grad_out`. Parameter gradients are accumulated into
  /// `grad_params` when non-null; returns dL/dx when `want_input` is set.
  template <class T>
  Tensor<T> backward(std::span<const Tensor<T>> params, const Tape<T>& tape, Tensor<T> grad_out,
                     std::span<Tensor<T>> grad_params, bool want_input) const;

 private:
  Shape input_;
  std::vector<LayerSpec> layers_;
};

namespace kernels {

template <class T>
void conv_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y);
template <class T>
void conv_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw,
                   Tensor<T>* db);

}  // namespace kernels

}  // namespace mngac
