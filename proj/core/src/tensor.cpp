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

#include "mngac/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace mngac {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string(what) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

Tensor<double> gather_samples(const Tensor<double>& t, std::span<const std::size_t> indices) {
  Shape shape = t.shape();
  shape[0] = indices.size();
  Tensor<double> out(shape);
  const std::size_t n = t.sample_size();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= t.batch()) throw InvalidArgument("gather_samples: index out of range");
    std::memcpy(out.data() + i * n, t.data() + indices[i] * n, n * sizeof(double));
  }
  return out;
}

std::uint64_t hash_values(std::span<const double> values) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace mngac
