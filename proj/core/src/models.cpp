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

#include "mngac/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mngac/losses.hpp"

namespace mngac {

Arch parse_arch(std::string_view name) {
  if (name == "linear") return Arch::Linear;
  if (name == "small_cnn") return Arch::SmallCnn;
  throw InvalidArgument("unknown architecture '" + std::string(name) + "' (expected linear or small_cnn)");
}

std::string arch_name(Arch arch) { return arch == Arch::Linear ? "linear" : "small_cnn"; }

namespace {

constexpr double kLeakySlope = 0.1;

Sequential build_classifier(const ClassifierSpec& s) {
  if (s.channels == 0 || s.height == 0 || s.width == 0 || s.classes < 2) {
    throw InvalidArgument("classifier needs positive input dims and at least two classes");
  }
  Sequential net({s.channels, s.height, s.width});
  // Inputs live in [0,1]; the network sees them centred and rescaled.
  net.affine(1.0 / kInputStd, -kInputMean / kInputStd);
  if (s.arch == Arch::Linear) {
    net.flatten().dense(s.classes);
    return net;
  }
  if (s.hidden == 0) throw InvalidArgument("small_cnn hidden width must be positive");
  if (s.height < 4 || s.width < 4) throw InvalidArgument("small_cnn needs images of at least 4x4");
  net.conv(s.hidden).leaky_relu(kLeakySlope).conv(s.hidden).leaky_relu(kLeakySlope).avg_pool2();
  net.conv(2 * s.hidden).leaky_relu(kLeakySlope).conv(2 * s.hidden).leaky_relu(kLeakySlope).avg_pool2();
  net.flatten().dense(s.classes);
  return net;
}

}  // namespace

Classifier::Classifier(const ClassifierSpec& spec, std::uint64_t seed) : spec_(spec), net_(build_classifier(spec)) {
  Rng rng(seed);
  params_ = net_.init(rng);
}

Tensor<double> Classifier::logits(std::span<const Tensor<double>> params, const Tensor<double>& x) const {
  return net_.forward<double>(params, x, nullptr);
}

double Classifier::loss_input_grad(const Tensor<double>& x, std::span<const int> labels, Tensor<double>* dx) const {
  Tape<double> tape;
  const Tensor<double> out = net_.forward<double>(params_, x, dx ? &tape : nullptr);
  Tensor<double> dlogits;
  const double loss = cls_loss<double>(out, labels, dx ? &dlogits : nullptr);
  if (dx) *dx = net_.backward<double>(params_, tape, std::move(dlogits), {}, true);
  return loss;
}

double Classifier::loss_param_grad(std::span<const Tensor<double>> params, const Tensor<double>& x,
                                   std::span<const int> labels, ParamSet<double>& grad,
                                   Tensor<double>* logits_out) const {
  Tape<double> tape;
  Tensor<double> out = net_.forward<double>(params, x, &tape);
  Tensor<double> dlogits;
  const double loss = cls_loss<double>(out, labels, &dlogits);
  grad = zeros_like<double>(params_);
  net_.backward<double>(params, tape, std::move(dlogits), grad, false);
  if (logits_out) *logits_out = std::move(out);
  return loss;
}

Classifier make_classifier(Arch arch, std::size_t channels, std::size_t height, std::size_t width,
                           std::size_t classes, std::uint64_t seed, std::size_t hidden) {
  return Classifier(ClassifierSpec{arch, channels, height, width, classes, hidden}, seed);
}

MetaNoiseGenerator::MetaNoiseGenerator(const GeneratorSpec& spec, std::uint64_t seed)
    : spec_(spec),
      stack_({2 * spec.channels, spec.height, spec.width}),
      skip_({spec.channels, spec.height, spec.width}) {
  if (spec.hidden == 0) throw InvalidArgument("generator hidden width must be positive");
  stack_.conv(spec.hidden).leaky_relu(spec.slope);
  stack_.conv(spec.hidden).leaky_relu(spec.slope);
  stack_.conv(spec.hidden).leaky_relu(spec.slope);
  stack_.conv(spec.channels);
  skip_.conv(spec.channels, 1);
  Rng rng(seed);
  params_ = stack_.init(rng);
  for (auto& p : skip_.init(rng)) params_.push_back(std::move(p));
}

void MetaNoiseGenerator::zero_output() {
  // Layout: 4 conv (w, b) pairs of the stack, then the skip (w, b).
  for (std::size_t i : {6u, 7u, 8u, 9u}) params_[i].fill(0.0);
}

namespace {


template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "generator input");
  const std::size_t n = a.dim(0), per = a.sample_size();
  Tensor<T> out({n, 2 * a.dim(1), a.dim(2), a.dim(3)});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(a.data() + s * per, per, out.data() + s * 2 * per);
    std::copy_n(b.data() + s * per, per, out.data() + s * 2 * per + per);
  }
  return out;
}

}  // namespace

template <class T>
Tensor<T> MetaNoiseGenerator::forward(std::span<const Tensor<T>> phi, const Tensor<T>& z, const Tensor<T>& x,
                                      GeneratorTape<T>* tape) const {
  if (phi.size() != 10) throw InvalidArgument("generator expects 10 parameter arrays");
  Tensor<T> h = stack_.forward<T>(phi.subspan(0, 8), concat_channels(z, x), tape ? &tape->stack : nullptr);
  const Tensor<T> r = skip_.forward<T>(phi.subspan(8, 2), x, tape ? &tape->skip : nullptr);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] += r[i];
  return h;
}

template <class T>
void MetaNoiseGenerator::backward(std::span<const Tensor<T>> phi, const GeneratorTape<T>& tape,
                                  const Tensor<T>& grad_out, std::span<Tensor<T>> grad_phi) const {
  stack_.backward<T>(phi.subspan(0, 8), tape.stack, grad_out, grad_phi.subspan(0, 8), false);
  skip_.backward<T>(phi.subspan(8, 2), tape.skip, grad_out, grad_phi.subspan(8, 2), false);
}

template <class T>
Tensor<T> augment_forward(const MetaNoiseGenerator& gen, std::span<const Tensor<T>> phi, const Tensor<T>& z,
                          const Tensor<T>& x, const NormBallSpec& ball, AugmentTape<T>* tape) {
  GeneratorTape<T> local;
  Tensor<T> noise = gen.forward<T>(phi, z, x, tape ? &tape->gen : &local);
  for (const T& v : noise.values()) {
    if (!std::isfinite(value_of(v))) throw NumericError("generator produced a non-finite value");
  }
  Tensor<T> delta = noise;
  for (std::size_t s = 0; s < delta.batch(); ++s) project_delta<T>(delta.sample(s), ball.p, ball.epsilon);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + delta[i];
  if (tape) {
    tape->noise = std::move(noise);
    tape->shifted = out;
  }
  for (T& v : out.values()) {
    if (value_of(v) < 0.0) v = T(0.0);
    if (value_of(v) > 1.0) v = T(1.0);
  }
  return out;
}

template <class T>
void augment_backward(const MetaNoiseGenerator& gen, std::span<const Tensor<T>> phi, const AugmentTape<T>& tape,
                      const NormBallSpec& ball, Tensor<T> grad_out, std::span<Tensor<T>> grad_phi) {
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const double s = value_of(tape.shifted[i]);
    if (s < 0.0 || s > 1.0) grad_out[i] = T(0.0);
  }
  for (std::size_t s = 0; s < grad_out.batch(); ++s) {
    project_delta_vjp<T>(tape.noise.sample(s), ball.p, ball.epsilon, grad_out.sample(s));
  }
  gen.backward<T>(phi, tape.gen, grad_out, grad_phi);
}

template Tensor<double> MetaNoiseGenerator::forward<double>(std::span<const Tensor<double>>, const Tensor<double>&,
                                                            const Tensor<double>&, GeneratorTape<double>*) const;
template Tensor<Dual> MetaNoiseGenerator::forward<Dual>(std::span<const Tensor<Dual>>, const Tensor<Dual>&,
                                                        const Tensor<Dual>&, GeneratorTape<Dual>*) const;
template void MetaNoiseGenerator::backward<double>(std::span<const Tensor<double>>, const GeneratorTape<double>&,
                                                   const Tensor<double>&, std::span<Tensor<double>>) const;
template void MetaNoiseGenerator::backward<Dual>(std::span<const Tensor<Dual>>, const GeneratorTape<Dual>&,
                                                 const Tensor<Dual>&, std::span<Tensor<Dual>>) const;
template Tensor<double> augment_forward<double>(const MetaNoiseGenerator&, std::span<const Tensor<double>>,
                                                const Tensor<double>&, const Tensor<double>&, const NormBallSpec&,
                                                AugmentTape<double>*);
template Tensor<Dual> augment_forward<Dual>(const MetaNoiseGenerator&, std::span<const Tensor<Dual>>,
                                            const Tensor<Dual>&, const Tensor<Dual>&, const NormBallSpec&,
                                            AugmentTape<Dual>*);
template void augment_backward<double>(const MetaNoiseGenerator&, std::span<const Tensor<double>>,
                                       const AugmentTape<double>&, const NormBallSpec&, Tensor<double>,
                                       std::span<Tensor<double>>);
template void augment_backward<Dual>(const MetaNoiseGenerator&, std::span<const Tensor<Dual>>,
                                     const AugmentTape<Dual>&, const NormBallSpec&, Tensor<Dual>,
                                     std::span<Tensor<Dual>>);

Tensor<double> sample_noise(const Shape& shape, Rng& rng) {
  Tensor<double> z(shape);
  for (double& v : z.values()) v = rng.normal();
  return z;
}

Tensor<double> generate_augmented(const MetaNoiseGenerator& gen, const Tensor<double>& x, const NormBallSpec& ball,
                                  Rng& rng) {
  const Tensor<double> z = sample_noise(x.shape(), rng);
  return augment_forward<double>(gen, gen.params(), z, x, ball, nullptr);
}

Tensor<Dual> to_dual(const Tensor<double>& t) {
  std::vector<Dual> v(t.values().begin(), t.values().end());
  return Tensor<Dual>(t.shape(), std::move(v));
}

Tensor<Dual> to_dual(const Tensor<double>& value, const Tensor<double>& tangent) {
  require_same_shape(value, tangent, "to_dual");
  std::vector<Dual> v(value.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = Dual(value[i], tangent[i]);
  return Tensor<Dual>(value.shape(), std::move(v));
}

ParamSet<Dual> to_dual(const ParamSet<double>& params) {
  ParamSet<Dual> out;
  for (const auto& p : params) out.push_back(to_dual(p));
  return out;
}

ParamSet<Dual> to_dual(const ParamSet<double>& params, const ParamSet<double>& tangent) {
  if (params.size() != tangent.size()) throw InvalidArgument("to_dual: tangent does not match parameters");
  ParamSet<Dual> out;
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back(to_dual(params[i], tangent[i]));
  return out;
}

}  // namespace mngac
