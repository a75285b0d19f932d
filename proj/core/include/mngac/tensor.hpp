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
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mngac/error.hpp"

namespace mngac {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major array. Rank 4 (batch, channels, height, width) for images,
/// rank 2 (batch, classes) for logits, rank 1 for parameter vectors.
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      throw InvalidArgument("tensor payload has " + std::to_string(data_.size()) + " values, shape " +
                            shape_string(shape_) + " needs " + std::to_string(shape_size(shape_)));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// Leading dimension; samples are indexed along it.
  std::size_t batch() const { return shape_.empty() ? 0 : shape_[0]; }
  /// Number of values per sample (product of all non-batch dimensions).
  std::size_t sample_size() const { return batch() == 0 ? 0 : size() / batch(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  std::span<T> sample(std::size_t i) { return {data_.data() + i * sample_size(), sample_size()}; }
  std::span<const T> sample(std::size_t i) const { return {data_.data() + i * sample_size(), sample_size()}; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor reshaped(Shape shape) const& { return Tensor(std::move(shape), data_); }
  Tensor reshaped(Shape shape) && { return Tensor(std::move(shape), std::move(data_)); }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Images in [0,1] plus their integer class labels.
struct Batch {
  Tensor<double> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
};

/// Throws InvalidArgument unless `a` and `b` have identical shapes.
template <class A, class B>
void require_same_shape(const Tensor<A>& a, const Tensor<B>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
}

/// Throws NumericError if any value is NaN or infinite.
void require_finite(std::span<const double> values, const char* what);

/// Copies selected samples (rows along the batch dimension) into a new tensor.
Tensor<double> gather_samples(const Tensor<double>& t, std::span<const std::size_t> indices);

/// FNV-1a hash of the raw bytes of the values; used to compare parameter states.
std::uint64_t hash_values(std::span<const double> values);

}  // namespace mngac
