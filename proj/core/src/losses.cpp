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

#include "mngac/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mngac/dual.hpp"

namespace mngac {

namespace {

void check_labels(std::size_t rows, std::size_t classes, std::span<const int> labels) {
  if (labels.size() != rows) {
    throw InvalidArgument("label count " + std::to_string(labels.size()) + " does not match batch " +
                          std::to_string(rows));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw InvalidArgument("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

}  // namespace

template <class T>
T cls_loss(const Tensor<T>& logits, std::span<const int> labels, Tensor<T>* grad) {
  using std::exp;
  using std::log;
  if (logits.rank() != 2) throw InvalidArgument("cls_loss expects (batch x classes) logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  check_labels(n, c, labels);
  if (grad) *grad = Tensor<T>(logits.shape());
  T total(0.0);
  const T inv_n(1.0 / static_cast<double>(n));
  std::vector<T> e(c);
  for (std::size_t s = 0; s < n; ++s) {
    const T* row = logits.data() + s * c;
    T top = row[0];
    for (std::size_t j = 1; j < c; ++j) {
      if (value_of(row[j]) > value_of(top)) top = row[j];
    }
    T sum(0.0);
    for (std::size_t j = 0; j < c; ++j) {
      e[j] = exp(row[j] - top);
      sum += e[j];
    }
    const T lse = top + log(sum);
    total += lse - row[labels[s]];
    if (grad) {
      T* g = grad->data() + s * c;
      for (std::size_t j = 0; j < c; ++j) g[j] = e[j] / sum * inv_n;
      g[labels[s]] -= inv_n;
    }
  }
  return total * inv_n;
}

template double cls_loss<double>(const Tensor<double>&, std::span<const int>, Tensor<double>*);
template Dual cls_loss<Dual>(const Tensor<Dual>&, std::span<const int>, Tensor<Dual>*);

std::vector<double> cls_loss_per_example(const Tensor<double>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw InvalidArgument("cls_loss expects (batch x classes) logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  check_labels(n, c, labels);
  std::vector<double> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = logits.data() + s * c;
    const double top = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - top);
    out[s] = top + std::log(sum) - row[labels[s]];
  }
  return out;
}

Tensor<double> softmax(const Tensor<double>& logits) {
  if (logits.rank() != 2) throw InvalidArgument("softmax expects (batch x classes) logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  Tensor<double> p(logits.shape());
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = logits.data() + s * c;
    double* out = p.data() + s * c;
    const double top = *std::max_element(row, row + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += out[j] = std::exp(row[j] - top);
    for (std::size_t j = 0; j < c; ++j) out[j] /= sum;
  }
  return p;
}

void validate(const PosteriorTriple& t) {
  require_same_shape(t.p_clean, t.p_adv, "PosteriorTriple");
  require_same_shape(t.p_clean, t.p_aug, "PosteriorTriple");
  if (t.p_clean.rank() != 2) throw InvalidArgument("PosteriorTriple rows must be (batch x classes)");
  const std::size_t n = t.p_clean.dim(0), c = t.p_clean.dim(1);
  for (const Tensor<double>* p : {&t.p_clean, &t.p_adv, &t.p_aug}) {
    for (std::size_t s = 0; s < n; ++s) {
      double sum = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double v = (*p)[s * c + j];
        if (!(v >= 0.0)) throw InvalidArgument("PosteriorTriple has a negative or NaN probability");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-5) throw InvalidArgument("PosteriorTriple row does not sum to 1");
    }
  }
}

namespace {

double floored_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

/// Per-row JSD and dJSD/dp for each of the three rows.
double jsd_row(const double* a, const double* b, const double* c, std::size_t classes, double* da, double* db,
               double* dc) {
  double value = 0.0;
  for (std::size_t j = 0; j < classes; ++j) {
    const double m = (a[j] + b[j] + c[j]) / 3.0;
    const double log_m = floored_log(m);
    const double la = floored_log(a[j]), lb = floored_log(b[j]), lc = floored_log(c[j]);
    value += a[j] * (la - log_m) + b[j] * (lb - log_m) + c[j] * (lc - log_m);
    if (da) {
      da[j] = (la - log_m) / 3.0;
      db[j] = (lb - log_m) / 3.0;
      dc[j] = (lc - log_m) / 3.0;
    }
  }
  return value / 3.0;
}

void softmax_vjp(const double* p, const double* dp, std::size_t classes, double scale, double* dl) {
  double dot = 0.0;
  for (std::size_t j = 0; j < classes; ++j) dot += p[j] * dp[j];
  for (std::size_t j = 0; j < classes; ++j) dl[j] = scale * p[j] * (dp[j] - dot);
}

}  // namespace

double ac_loss(const PosteriorTriple& t) {
  validate(t);
  const std::size_t n = t.p_clean.dim(0), c = t.p_clean.dim(1);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    total += jsd_row(t.p_clean.data() + s * c, t.p_adv.data() + s * c, t.p_aug.data() + s * c, c, nullptr, nullptr,
                     nullptr);
  }
  return total / static_cast<double>(n);
}

double ac_loss_from_logits(const Tensor<double>& clean, const Tensor<double>& adv, const Tensor<double>& aug,
                           Tensor<double>* d_clean, Tensor<double>* d_adv, Tensor<double>* d_aug) {
  require_same_shape(clean, adv, "ac_loss");
  require_same_shape(clean, aug, "ac_loss");
  const Tensor<double> pc = softmax(clean), pa = softmax(adv), pg = softmax(aug);
  const std::size_t n = clean.dim(0), c = clean.dim(1);
  const double scale = 1.0 / static_cast<double>(n);
  if (d_clean) *d_clean = Tensor<double>(clean.shape());
  if (d_adv) *d_adv = Tensor<double>(clean.shape());
  if (d_aug) *d_aug = Tensor<double>(clean.shape());
  std::vector<double> da(c), db(c), dc(c);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* a = pc.data() + s * c;
    const double* b = pa.data() + s * c;
    const double* g = pg.data() + s * c;
    total += jsd_row(a, b, g, c, da.data(), db.data(), dc.data());
    if (d_clean) softmax_vjp(a, da.data(), c, scale, d_clean->data() + s * c);
    if (d_adv) softmax_vjp(b, db.data(), c, scale, d_adv->data() + s * c);
    if (d_aug) softmax_vjp(g, dc.data(), c, scale, d_aug->data() + s * c);
  }
  return total * scale;
}

double total_loss(double cls, double ac, double beta) {
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be >= 0");
  return cls + beta * ac;
}

std::vector<int> predictions(const Tensor<double>& logits) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double* row = logits.data() + s * c;
    out[s] = static_cast<int>(std::max_element(row, row + c) - row);
  }
  return out;
}

double accuracy(const Tensor<double>& logits, std::span<const int> labels) {
  const auto pred = predictions(logits);
  if (pred.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace mngac
