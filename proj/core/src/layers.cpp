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

#include "mngac/layers.hpp"

#include <algorithm>
#include <cmath>

#include "mngac/dual.hpp"

namespace mngac {

std::size_t parameter_count(const ParamSet<double>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

std::vector<double> flatten_params(const ParamSet<double>& params) {
  std::vector<double> flat;
  flat.reserve(parameter_count(params));
  for (const auto& p : params) flat.insert(flat.end(), p.values().begin(), p.values().end());
  return flat;
}

ParamSet<double> unflatten_params(std::span<const double> flat, const ParamSet<double>& like) {
  if (flat.size() != parameter_count(like)) throw InvalidArgument("unflatten_params: size mismatch");
  ParamSet<double> out = zeros_like<double>(like);
  std::size_t offset = 0;
  for (auto& p : out) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), p.size(), p.storage().begin());
    offset += p.size();
  }
  return out;
}

std::uint64_t parameter_hash(const ParamSet<double>& params) { return hash_values(flatten_params(params)); }

Sequential::Sequential(Shape input_shape) : input_(std::move(input_shape)) {
  if (input_.empty()) throw InvalidArgument("Sequential: empty input shape");
}

const Shape& Sequential::output_shape() const { return layers_.empty() ? input_ : layers_.back().out; }

std::size_t Sequential::param_arrays() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += (l.kind == LayerKind::Conv || l.kind == LayerKind::Dense) ? 2 : 0;
  return n;
}

Sequential& Sequential::conv(std::size_t out_channels, std::size_t kernel) {
  const Shape& in = output_shape();
  if (in.size() != 3) throw InvalidArgument("conv expects a (C,H,W) input");
  if (kernel != 1 && kernel != 3) throw InvalidArgument("conv kernel must be 1 or 3");
  layers_.push_back({LayerKind::Conv, in, {out_channels, in[1], in[2]}, kernel, 0.0});
  return *this;
}

Sequential& Sequential::dense(std::size_t out_features) {
  const Shape& in = output_shape();
  if (in.size() != 1) throw InvalidArgument("dense expects a flat input; add flatten() first");
  layers_.push_back({LayerKind::Dense, in, {out_features}, 0, 0.0});
  return *this;
}

Sequential& Sequential::relu() {
  const Shape in = output_shape();
  layers_.push_back({LayerKind::Relu, in, in, 0, 0.0});
  return *this;
}

Sequential& Sequential::leaky_relu(double slope) {
  const Shape in = output_shape();
  layers_.push_back({LayerKind::LeakyRelu, in, in, 0, slope});
  return *this;
}

Sequential& Sequential::affine(double scale, double shift) {
  const Shape in = output_shape();
  layers_.push_back({LayerKind::Affine, in, in, 0, scale, shift});
  return *this;
}

Sequential& Sequential::avg_pool2() {
  const Shape in = output_shape();
  if (in.size() != 3 || in[1] < 2 || in[2] < 2) throw InvalidArgument("avg_pool2 needs a (C,H,W) input with H,W >= 2");
  layers_.push_back({LayerKind::AvgPool2, in, {in[0], in[1] / 2, in[2] / 2}, 0, 0.0});
  return *this;
}

Sequential& Sequential::flatten() {
  const Shape in = output_shape();
  layers_.push_back({LayerKind::Flatten, in, {shape_size(in)}, 0, 0.0});
  return *this;
}

ParamSet<double> Sequential::init(Rng& rng) const {
  ParamSet<double> params;
  for (const auto& l : layers_) {
    Shape w_shape;
    std::size_t fan_in = 0;
    if (l.kind == LayerKind::Conv) {
      w_shape = {l.out[0], l.in[0], l.kernel, l.kernel};
      fan_in = l.in[0] * l.kernel * l.kernel;
    } else if (l.kind == LayerKind::Dense) {
      w_shape = {l.out[0], l.in[0]};
      fan_in = l.in[0];
    } else {
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor<double> w(w_shape);
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    Tensor<double> b(Shape{l.out[0]});
    params.push_back(std::move(w));
    params.push_back(std::move(b));
  }
  return params;
}

namespace kernels {

namespace {

template <class T>
void im2col(const T* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k, T* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = h * w;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = cols + ((ci * k + ky) * k + kx) * hw;
        for (std::size_t yy = 0; yy < h; ++yy) {
          const auto sy = static_cast<std::ptrdiff_t>(yy + ky) - pad;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const auto sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
            const bool inside = sy >= 0 && sx >= 0 && sy < static_cast<std::ptrdiff_t>(h) &&
                                sx < static_cast<std::ptrdiff_t>(w);
            row[yy * w + xx] = inside ? x[(ci * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)] : T(0.0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k, T* dx) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::size_t hw = h * w;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = cols + ((ci * k + ky) * k + kx) * hw;
        for (std::size_t yy = 0; yy < h; ++yy) {
          const auto sy = static_cast<std::ptrdiff_t>(yy + ky) - pad;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t xx = 0; xx < w; ++xx) {
            const auto sx = static_cast<std::ptrdiff_t>(xx + kx) - pad;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            dx[(ci * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)] += row[yy * w + xx];
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
void conv_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Tensor<T>& y) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t o = w.dim(0), k = w.dim(2);
  const std::size_t hw = h * wd, ck = c * k * k;
  y = Tensor<T>({n, o, h, wd});
  std::vector<T> cols(ck * hw);
  for (std::size_t s = 0; s < n; ++s) {
    const T* xs = x.data() + s * c * hw;
    const T* src = xs;
    if (k == 1) {
      src = xs;
    } else {
      im2col(xs, c, h, wd, k, cols.data());
      src = cols.data();
    }
    T* ys = y.data() + s * o * hw;
    for (std::size_t oi = 0; oi < o; ++oi) {
      T* yrow = ys + oi * hw;
      std::fill(yrow, yrow + hw, b[oi]);
      const T* wrow = w.data() + oi * ck;
      for (std::size_t j = 0; j < ck; ++j) {
        const T wv = wrow[j];
        const T* crow = src + j * hw;
        for (std::size_t p = 0; p < hw; ++p) yrow[p] += wv * crow[p];
      }
    }
  }
}

template <class T>
void conv_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw,
                   Tensor<T>* db) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t o = w.dim(0), k = w.dim(2);
  const std::size_t hw = h * wd, ck = c * k * k;
  std::vector<T> cols(ck * hw);
  std::vector<T> dcols(ck * hw);
  if (dx) *dx = Tensor<T>(x.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const T* xs = x.data() + s * c * hw;
    const T* dys = dy.data() + s * o * hw;
    const T* src = xs;
    if (k != 1) {
      im2col(xs, c, h, wd, k, cols.data());
      src = cols.data();
    }
    if (db) {
      for (std::size_t oi = 0; oi < o; ++oi) {
        T acc(0.0);
        const T* drow = dys + oi * hw;
        for (std::size_t p = 0; p < hw; ++p) acc += drow[p];
        (*db)[oi] += acc;
      }
    }
    if (dw) {
      for (std::size_t oi = 0; oi < o; ++oi) {
        const T* drow = dys + oi * hw;
        T* dwrow = dw->data() + oi * ck;
        for (std::size_t j = 0; j < ck; ++j) {
          const T* crow = src + j * hw;
          T acc(0.0);
          for (std::size_t p = 0; p < hw; ++p) acc += drow[p] * crow[p];
          dwrow[j] += acc;
        }
      }
    }
    if (dx) {
      T* target = k == 1 ? dx->data() + s * c * hw : dcols.data();
      std::fill(target, target + ck * hw, T(0.0));
      for (std::size_t oi = 0; oi < o; ++oi) {
        const T* drow = dys + oi * hw;
        const T* wrow = w.data() + oi * ck;
        for (std::size_t j = 0; j < ck; ++j) {
          const T wv = wrow[j];
          T* trow = target + j * hw;
          for (std::size_t p = 0; p < hw; ++p) trow[p] += wv * drow[p];
        }
      }
      if (k != 1) col2im(dcols.data(), c, h, wd, k, dx->data() + s * c * hw);
    }
  }
}

}  // namespace kernels

template <class T>
Tensor<T> Sequential::forward(std::span<const Tensor<T>> params, const Tensor<T>& x, Tape<T>* tape) const {
  if (params.size() != param_arrays()) throw InvalidArgument("Sequential::forward: wrong number of parameter arrays");
  Shape expected = input_;
  expected.insert(expected.begin(), x.batch());
  if (x.shape() != expected) {
    throw InvalidArgument("Sequential::forward: input shape " + shape_string(x.shape()) + " does not match " +
                          shape_string(expected));
  }
  if (tape) tape->inputs.clear();
  Tensor<T> cur = x;
  std::size_t pi = 0;
  const std::size_t n = x.batch();
  for (const auto& l : layers_) {
    if (tape) tape->inputs.push_back(cur);
    Shape out_shape = l.out;
    out_shape.insert(out_shape.begin(), n);
    switch (l.kind) {
      case LayerKind::Conv: {
        Tensor<T> y;
        kernels::conv_forward(cur, params[pi], params[pi + 1], y);
        pi += 2;
        cur = std::move(y);
        break;
      }
      case LayerKind::Dense: {
        const Tensor<T>& w = params[pi];
        const Tensor<T>& b = params[pi + 1];
        pi += 2;
        const std::size_t in_f = l.in[0], out_f = l.out[0];
        Tensor<T> y(out_shape);
        for (std::size_t s = 0; s < n; ++s) {
          const T* xs = cur.data() + s * in_f;
          for (std::size_t o = 0; o < out_f; ++o) {
            T acc = b[o];
            const T* wrow = w.data() + o * in_f;
            for (std::size_t i = 0; i < in_f; ++i) acc += wrow[i] * xs[i];
            y[s * out_f + o] = acc;
          }
        }
        cur = std::move(y);
        break;
      }
      case LayerKind::Relu:
        for (T& v : cur.values()) {
          if (value_of(v) < 0.0) v = T(0.0);
        }
        break;
      case LayerKind::LeakyRelu:
        for (T& v : cur.values()) {
          if (value_of(v) < 0.0) v *= T(l.slope);
        }
        break;
      case LayerKind::Affine:
        for (T& v : cur.values()) v = v * T(l.slope) + T(l.shift);
        break;
      case LayerKind::AvgPool2: {
        const std::size_t c = l.in[0], h = l.in[1], w = l.in[2];
        const std::size_t oh = l.out[1], ow = l.out[2];
        Tensor<T> y(out_shape);
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t ci = 0; ci < c; ++ci) {
            const T* src = cur.data() + (s * c + ci) * h * w;
            T* dst = y.data() + (s * c + ci) * oh * ow;
            for (std::size_t yy = 0; yy < oh; ++yy) {
              for (std::size_t xx = 0; xx < ow; ++xx) {
                const T sum = src[2 * yy * w + 2 * xx] + src[2 * yy * w + 2 * xx + 1] +
                              src[(2 * yy + 1) * w + 2 * xx] + src[(2 * yy + 1) * w + 2 * xx + 1];
                dst[yy * ow + xx] = sum * T(0.25);
              }
            }
          }
        }
        cur = std::move(y);
        break;
      }
      case LayerKind::Flatten:
        cur = std::move(cur).reshaped(out_shape);
        break;
    }
  }
  return cur;
}

template <class T>
Tensor<T> Sequential::backward(std::span<const Tensor<T>> params, const Tape<T>& tape, Tensor<T> grad_out,
                               std::span<Tensor<T>> grad_params, bool want_input) const {
  if (tape.inputs.size() != layers_.size()) throw InvalidArgument("Sequential::backward: tape does not match network");
  const bool want_params = !grad_params.empty();
  if (want_params && grad_params.size() != param_arrays()) {
    throw InvalidArgument("Sequential::backward: wrong number of gradient arrays");
  }
  std::size_t pi = param_arrays();
  Tensor<T> g = std::move(grad_out);
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = layers_[li];
    const Tensor<T>& in = tape.inputs[li];
    const std::size_t n = in.batch();
    const bool need_dx = want_input || li > 0;
    switch (l.kind) {
      case LayerKind::Conv: {
        pi -= 2;
        Tensor<T> dx;
        kernels::conv_backward(in, params[pi], g, need_dx ? &dx : nullptr, want_params ? &grad_params[pi] : nullptr,
                               want_params ? &grad_params[pi + 1] : nullptr);
        g = std::move(dx);
        break;
      }
      case LayerKind::Dense: {
        pi -= 2;
        const Tensor<T>& w = params[pi];
        const std::size_t in_f = l.in[0], out_f = l.out[0];
        Tensor<T> dx(need_dx ? in.shape() : Shape{0});
        for (std::size_t s = 0; s < n; ++s) {
          const T* xs = in.data() + s * in_f;
          const T* gs = g.data() + s * out_f;
          for (std::size_t o = 0; o < out_f; ++o) {
            const T go = gs[o];
            if (want_params) {
              T* dwrow = grad_params[pi].data() + o * in_f;
              for (std::size_t i = 0; i < in_f; ++i) dwrow[i] += go * xs[i];
              grad_params[pi + 1][o] += go;
            }
            if (need_dx) {
              const T* wrow = w.data() + o * in_f;
              T* dxs = dx.data() + s * in_f;
              for (std::size_t i = 0; i < in_f; ++i) dxs[i] += go * wrow[i];
            }
          }
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::Relu:
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (value_of(in[i]) < 0.0) g[i] = T(0.0);
        }
        break;
      case LayerKind::LeakyRelu:
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (value_of(in[i]) < 0.0) g[i] *= T(l.slope);
        }
        break;
      case LayerKind::Affine:
        for (T& v : g.values()) v *= T(l.slope);
        break;
      case LayerKind::AvgPool2: {
        const std::size_t c = l.in[0], h = l.in[1], w = l.in[2];
        const std::size_t oh = l.out[1], ow = l.out[2];
        Tensor<T> dx(in.shape());
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t ci = 0; ci < c; ++ci) {
            const T* src = g.data() + (s * c + ci) * oh * ow;
            T* dst = dx.data() + (s * c + ci) * h * w;
            for (std::size_t yy = 0; yy < oh; ++yy) {
              for (std::size_t xx = 0; xx < ow; ++xx) {
                const T v = src[yy * ow + xx] * T(0.25);
                dst[2 * yy * w + 2 * xx] = v;
                dst[2 * yy * w + 2 * xx + 1] = v;
                dst[(2 * yy + 1) * w + 2 * xx] = v;
                dst[(2 * yy + 1) * w + 2 * xx + 1] = v;
              }
            }
          }
        }
        g = std::move(dx);
        break;
      }
      case LayerKind::Flatten:
        g = std::move(g).reshaped(in.shape());
        break;
    }
  }
  return want_input ? g : Tensor<T>();
}

template Tensor<double> Sequential::forward<double>(std::span<const Tensor<double>>, const Tensor<double>&,
                                                    Tape<double>*) const;
template Tensor<Dual> Sequential::forward<Dual>(std::span<const Tensor<Dual>>, const Tensor<Dual>&, Tape<Dual>*) const;
template Tensor<double> Sequential::backward<double>(std::span<const Tensor<double>>, const Tape<double>&,
                                                     Tensor<double>, std::span<Tensor<double>>, bool) const;
template Tensor<Dual> Sequential::backward<Dual>(std::span<const Tensor<Dual>>, const Tape<Dual>&, Tensor<Dual>,
                                                 std::span<Tensor<Dual>>, bool) const;

template void kernels::conv_forward<double>(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                            Tensor<double>&);
template void kernels::conv_backward<double>(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                             Tensor<double>*, Tensor<double>*, Tensor<double>*);

}  // namespace mngac
