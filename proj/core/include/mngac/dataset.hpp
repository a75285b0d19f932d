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
#include <filesystem>
#include <optional>
#include <vector>

#include "mngac/config.hpp"
#include "mngac/tensor.hpp"

namespace mngac {

struct DatasetSplit {
  Batch train;
  Batch test;
};

/// Builds the configured dataset, deterministic in `seed`.
///  - blobs: one Gaussian blob per class at a class-specific position on a
///    mid-gray background, an optional faint blocky per-class texture and
///    per-pixel noise.
///  - moons: two-moons points rendered as a blob at the point's position.
///  - raw:   {train,test}_{images,labels}.mngt under `path`, truncated to the
///    configured sizes.
DatasetSplit load_dataset(const DatasetConfig& config, std::uint64_t seed);

/// Shuffled mini-batches; epoch e uses the permutation seeded by
/// derive_seed(seed, e), so a position (epoch, index) fully determines a batch.
class BatchStream {
 public:
  BatchStream(const Batch& data, std::size_t batch_size, std::uint64_t seed);

  std::size_t batches_per_epoch() const;
  Batch batch(std::size_t epoch, std::size_t index) const;
  /// Sample indices of (epoch, index), in batch order.
  std::vector<std::size_t> indices(std::size_t epoch, std::size_t index) const;

 private:
  const Batch* data_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  mutable std::optional<std::size_t> cached_epoch_;
  mutable std::vector<std::size_t> order_;
};

// Raw tensor files: little-endian "MNGT", u32 version, u32 rank, u64 dims[rank],
// u32 dtype tag, then the row-major payload.
inline constexpr std::uint32_t kRawTensorVersion = 1;
inline constexpr std::uint32_t kDtypeFloat32 = 1;
inline constexpr std::uint32_t kDtypeInt64 = 2;

/// Writes images as float32.
void write_raw_tensor(const std::filesystem::path& path, const Tensor<double>& t);
/// Reads a float32 tensor; checks its shape against `expected` when given.
Tensor<double> read_raw_tensor(const std::filesystem::path& path, const std::optional<Shape>& expected = {});
void write_raw_labels(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> read_raw_labels(const std::filesystem::path& path);

/// Writes a split in the directory layout `load_dataset` reads for "raw".
void write_raw_dataset(const std::filesystem::path& dir, const DatasetSplit& split);

}  // namespace mngac
