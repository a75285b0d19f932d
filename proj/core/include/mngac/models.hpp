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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "mngac/dual.hpp"
#include "mngac/layers.hpp"
#include "mngac/normball.hpp"

namespace mngac {

enum class Arch { Linear, SmallCnn };

Arch parse_arch(std::string_view name);
std::string arch_name(Arch arch);

struct ClassifierSpec {
  Arch arch = Arch::SmallCnn;
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t classes = 10;
  /// Channels of the first conv block; the second block uses twice as many.
  std::size_t hidden = 8;

  std::size_t input_size() const { return channels * height * width; }
};

/// Fixed standardization applied to classifier inputs.
inline constexpr double kInputMean = 0.5;
inline constexpr double kInputStd = 0.25;

/// Image classifier f_theta producing (batch x classes) logits.
class Classifier {
 public:
  Classifier(const ClassifierSpec& spec, std::uint64_t seed);

  const ClassifierSpec& spec() const { return spec_; }
  const Sequential& net() const { return net_; }
  ParamSet<double>& params() { return params_; }
  const ParamSet<double>& params() const { return params_; }
  std::size_t parameter_count() const { return mngac::parameter_count(params_); }
  std::uint64_t hash() const { return parameter_hash(params_); }

  Tensor<double> logits(const Tensor<double>& x) const { return logits(params_, x); }
  Tensor<double> logits(std::span<const Tensor<double>> params, const Tensor<double>& x) const;

  /// Mean cross-entropy at `x` and its gradient with respect to the input.
  double loss_input_grad(const Tensor<double>& x, std::span<const int> labels, Tensor<double>* dx) const;

  /// Mean cross-entropy under `params` and its gradient with respect to them
  /// (overwrites `grad`). Optionally also returns the logits.
  double loss_param_grad(std::span<const Tensor<double>> params, const Tensor<double>& x, std::span<const int> labels,
                         ParamSet<double>& grad, Tensor<double>* logits_out = nullptr) const;

 private:
  ClassifierSpec spec_;
  Sequential net_;
  ParamSet<double> params_;
};

/// Builds `linear` (flatten + dense) or `small_cnn` (four 3x3 convs with two
/// average pools and a dense head), initialized deterministically from `seed`.
Classifier make_classifier(Arch arch, std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t classes, std::uint64_t seed, std::size_t hidden = 8);

struct GeneratorSpec {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t hidden = 32;
  double slope = 0.01;
};

template <class T>
struct GeneratorTape {
  Tape<T> stack;
  Tape<T> skip;
};

/// Noise generator g_phi(z, x): z and x are concatenated along channels and
/// passed through four 3x3 convs with LeakyReLU; a learned 1x1 transform of
/// x is added to the result. The output has the shape of x.
class MetaNoiseGenerator {
 public:
  MetaNoiseGenerator(const GeneratorSpec& spec, std::uint64_t seed);

  const GeneratorSpec& spec() const { return spec_; }
  ParamSet<double>& params() { return params_; }
  const ParamSet<double>& params() const { return params_; }
  std::uint64_t hash() const { return parameter_hash(params_); }

  /// Zeroes the last conv and the skip transform so that g == 0.
  void zero_output();

  template <class T>
  Tensor<T> forward(std::span<const Tensor<T>> phi, const Tensor<T>& z, const Tensor<T>& x,
                    GeneratorTape<T>* tape) const;

  /// Accumulates dL/dphi into `grad_phi` given dL/dg.
  template <class T>
  void backward(std::span<const Tensor<T>> phi, const GeneratorTape<T>& tape, const Tensor<T>& grad_out,
                std::span<Tensor<T>> grad_phi) const;

 private:
  GeneratorSpec spec_;
  Sequential stack_;
  Sequential skip_;
  ParamSet<double> params_;
};

template <class T>
struct AugmentTape {
  GeneratorTape<T> gen;
  Tensor<T> noise;    // g_phi(z, x) before projection
  Tensor<T> shifted;  // x + projected noise, before the [0,1] clamp
};

/// clamp(x + proj_eps(g_phi(z, x)), 0, 1) for a given noise draw z.
template <class T>
Tensor<T> augment_forward(const MetaNoiseGenerator& gen, std::span<const Tensor<T>> phi, const Tensor<T>& z,
                          const Tensor<T>& x, const NormBallSpec& ball, AugmentTape<T>* tape);

/// Accumulates dL/dphi given dL/dx_aug, through the clamp and projection.
template <class T>
void augment_backward(const MetaNoiseGenerator& gen, std::span<const Tensor<T>> phi, const AugmentTape<T>& tape,
                      const NormBallSpec& ball, Tensor<T> grad_out, std::span<Tensor<T>> grad_phi);

/// Standard normal noise of the given shape.
Tensor<double> sample_noise(const Shape& shape, Rng& rng);

/// Draws z ~ N(0, I) from `rng` and returns the projected, clamped augmentation.
Tensor<double> generate_augmented(const MetaNoiseGenerator& gen, const Tensor<double>& x, const NormBallSpec& ball,
                                  Rng& rng);

Tensor<Dual> to_dual(const Tensor<double>& t);
Tensor<Dual> to_dual(const Tensor<double>& value, const Tensor<double>& tangent);
ParamSet<Dual> to_dual(const ParamSet<double>& params);
ParamSet<Dual> to_dual(const ParamSet<double>& params, const ParamSet<double>& tangent);

}  // namespace mngac
