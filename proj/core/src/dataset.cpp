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

#include "mngac/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "mngac/rng.hpp"

namespace mngac {

static_assert(std::endian::native == std::endian::little, "raw tensor IO assumes a little-endian host");

namespace {

void render_blob(std::span<double> image, std::size_t channels, std::size_t h, std::size_t w, double cy, double cx,
                 double radius, double amplitude, std::span<const double> tint) {
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      const double v = amplitude * std::exp(-(dy * dy + dx * dx) / (2.0 * radius * radius));
      for (std::size_t c = 0; c < channels; ++c) image[(c * h + y) * w + x] += v * tint[c];
    }
  }
}

Batch make_synthetic(const DatasetConfig& cfg, std::size_t count, Rng& rng, const Tensor<double>& textures) {
  const std::size_t c = cfg.channels, h = cfg.height, w = cfg.width;
  Batch b{Tensor<double>({count, c, h, w}), std::vector<int>(count)};
  const double side = static_cast<double>(std::min(h, w));
  const double radius = cfg.radius > 0.0 ? cfg.radius : std::max(1.0, side / 6.0);
  std::vector<double> tint(c, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    auto image = b.x.sample(i);
    std::fill(image.begin(), image.end(), 0.5 - cfg.contrast / 2.0);
    double cy = 0.0, cx = 0.0;
    int label = 0;
    if (cfg.name == "moons") {
      label = static_cast<int>(rng.index(2));
      const double t = rng.uniform(0.0, std::numbers::pi);
      double u = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
      double v = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
      u += cfg.jitter * 0.2 * rng.normal();
      v += cfg.jitter * 0.2 * rng.normal();
      // (u, v) spans roughly [-1, 2] x [-0.5, 1].
      cx = (u + 1.0) / 3.0 * static_cast<double>(w - 1);
      cy = (1.0 - (v + 0.5) / 1.5) * static_cast<double>(h - 1);
    } else {
      label = static_cast<int>(rng.index(cfg.classes));
      const double angle = 2.0 * std::numbers::pi * label / static_cast<double>(cfg.classes);
      const double ring = 0.3 * side;
      cy = (static_cast<double>(h) - 1.0) / 2.0 + ring * std::sin(angle) + cfg.jitter * rng.normal();
      cx = (static_cast<double>(w) - 1.0) / 2.0 + ring * std::cos(angle) + cfg.jitter * rng.normal();
      if (cfg.texture > 0.0) {
        const auto pattern = textures.sample(static_cast<std::size_t>(label));
        for (std::size_t k = 0; k < image.size(); ++k) image[k] += cfg.texture * pattern[k];
      }
      for (std::size_t ch = 0; ch < c; ++ch) {
        tint[ch] = c == 1 ? 1.0 : 0.5 + 0.5 * std::cos(angle + 2.0 * std::numbers::pi * ch / static_cast<double>(c));
      }
    }
    render_blob(image, c, h, w, cy, cx, radius, cfg.contrast, tint);
    for (double& v : image) v = std::clamp(v + cfg.noise * rng.normal(), 0.0, 1.0);
    b.y[i] = label;
  }
  return b;
}

// Sign of a sum of a few low-frequency plane waves: blocky +/-1 regions that
// survive pooling. One pattern per class, shared by both splits.
Tensor<double> class_textures(const DatasetConfig& cfg, Rng& rng) {
  const std::size_t c = cfg.channels, h = cfg.height, w = cfg.width;
  Tensor<double> out({cfg.classes, c, h, w});
  constexpr int kWaves = 4;
  for (std::size_t k = 0; k < cfg.classes; ++k) {
    double fu[kWaves], fv[kWaves], amp[kWaves], phase[kWaves];
    for (int i = 0; i < kWaves; ++i) {
      do {
        fu[i] = static_cast<double>(rng.index(5)) - 2.0;
        fv[i] = static_cast<double>(rng.index(5)) - 2.0;
      } while (fu[i] == 0.0 && fv[i] == 0.0);
      amp[i] = rng.normal();
      phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    auto pattern = out.sample(k);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double shift = 2.0 * std::numbers::pi * static_cast<double>(ch) / static_cast<double>(c);
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          double f = 0.0;
          for (int i = 0; i < kWaves; ++i) {
            f += amp[i] * std::cos(2.0 * std::numbers::pi *
                                       (fu[i] * static_cast<double>(x) / static_cast<double>(w) +
                                        fv[i] * static_cast<double>(y) / static_cast<double>(h)) +
                                   phase[i] + shift);
          }
          pattern[(ch * h + y) * w + x] = f >= 0.0 ? 1.0 : -1.0;
        }
      }
    }
  }
  return out;
}

Batch take(Batch b, std::size_t count, const char* what) {
  if (b.size() < count) {
    throw IoError(std::string(what) + " has " + std::to_string(b.size()) + " examples, config asks for " +
                  std::to_string(count));
  }
  if (b.size() == count) return b;
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return Batch{gather_samples(b.x, idx), std::vector<int>(b.y.begin(), b.y.begin() + static_cast<std::ptrdiff_t>(count))};
}

void write_header(std::ofstream& out, const Shape& shape, std::uint32_t dtype) {
  out.write("MNGT", 4);
  const std::uint32_t version = kRawTensorVersion;
  const auto rank = static_cast<std::uint32_t>(shape.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&rank), 4);
  for (std::size_t d : shape) {
    const auto v = static_cast<std::uint64_t>(d);
    out.write(reinterpret_cast<const char*>(&v), 8);
  }
  out.write(reinterpret_cast<const char*>(&dtype), 4);
}

Shape read_header(std::ifstream& in, const std::filesystem::path& path, std::uint32_t expected_dtype) {
  char magic[4];
  std::uint32_t version = 0, rank = 0, dtype = 0;
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "MNGT", 4) != 0) throw IoError(path.string() + ": not a raw tensor file");
  in.read(reinterpret_cast<char*>(&version), 4);
  if (!in) throw IoError(path.string() + ": truncated header");
  if (version != kRawTensorVersion) {
    throw VersionError(path.string() + ": raw tensor version " + std::to_string(version) + ", expected " +
                       std::to_string(kRawTensorVersion));
  }
  in.read(reinterpret_cast<char*>(&rank), 4);
  if (!in || rank == 0 || rank > 8) throw IoError(path.string() + ": bad rank");
  Shape shape(rank);
  for (auto& d : shape) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    d = static_cast<std::size_t>(v);
  }
  in.read(reinterpret_cast<char*>(&dtype), 4);
  if (!in) throw IoError(path.string() + ": truncated header");
  if (dtype != expected_dtype) throw IoError(path.string() + ": unexpected dtype tag " + std::to_string(dtype));
  return shape;
}

}  // namespace

DatasetSplit load_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  if (cfg.name == "raw") {
    const std::filesystem::path dir(cfg.path);
    const Shape sample{cfg.channels, cfg.height, cfg.width};
    auto load = [&](const char* prefix, std::size_t count) {
      Tensor<double> x = read_raw_tensor(dir / (std::string(prefix) + "_images.mngt"));
      if (x.rank() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != sample) {
        throw IoError(std::string(prefix) + " images have shape " + shape_string(x.shape()) +
                      ", config declares (N," + std::to_string(cfg.channels) + "," + std::to_string(cfg.height) + "," +
                      std::to_string(cfg.width) + ")");
      }
      std::vector<int> y = read_raw_labels(dir / (std::string(prefix) + "_labels.mngt"));
      if (y.size() != x.batch()) throw IoError(std::string(prefix) + " labels do not match the image count");
      for (int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= cfg.classes) {
          throw IoError(std::string(prefix) + " labels fall outside [0, classes)");
        }
      }
      for (double v : x.values()) {
        if (!(v >= 0.0 && v <= 1.0)) throw IoError(std::string(prefix) + " images have values outside [0,1]");
      }
      return take(Batch{std::move(x), std::move(y)}, count, prefix);
    };
    return {load("train", cfg.train_size), load("test", cfg.test_size)};
  }
  if (cfg.name != "blobs" && cfg.name != "moons") throw InvalidArgument("unknown dataset '" + cfg.name + "'");
  Rng texture_rng(derive_seed(seed, 102));
  const Tensor<double> textures = class_textures(cfg, texture_rng);
  Rng train_rng(derive_seed(seed, 100));
  Rng test_rng(derive_seed(seed, 101));
  return {make_synthetic(cfg, cfg.train_size, train_rng, textures),
          make_synthetic(cfg, cfg.test_size, test_rng, textures)};
}

BatchStream::BatchStream(const Batch& data, std::size_t batch_size, std::uint64_t seed)
    : data_(&data), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  if (data.size() == 0) throw InvalidArgument("cannot stream an empty dataset");
}

std::size_t BatchStream::batches_per_epoch() const { return (data_->size() + batch_size_ - 1) / batch_size_; }

std::vector<std::size_t> BatchStream::indices(std::size_t epoch, std::size_t index) const {
  if (index >= batches_per_epoch()) throw InvalidArgument("batch index past the end of the epoch");
  if (cached_epoch_ != epoch) {
    order_.resize(data_->size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(derive_seed(seed_, epoch));
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng.index(i)]);
    cached_epoch_ = epoch;
  }
  const std::size_t begin = index * batch_size_;
  const std::size_t end = std::min(order_.size(), begin + batch_size_);
  return {order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(end)};
}

Batch BatchStream::batch(std::size_t epoch, std::size_t index) const {
  const auto idx = indices(epoch, index);
  Batch b{gather_samples(data_->x, idx), {}};
  b.y.reserve(idx.size());
  for (std::size_t i : idx) b.y.push_back(data_->y[i]);
  return b;
}

void write_raw_tensor(const std::filesystem::path& path, const Tensor<double>& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_header(out, t.shape(), kDtypeFloat32);
  std::vector<float> payload(t.values().begin(), t.values().end());
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw IoError("failed writing " + path.string());
}

Tensor<double> read_raw_tensor(const std::filesystem::path& path, const std::optional<Shape>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const Shape shape = read_header(in, path, kDtypeFloat32);
  if (expected && *expected != shape) {
    throw IoError(path.string() + ": shape " + shape_string(shape) + " does not match " + shape_string(*expected));
  }
  std::vector<float> payload(shape_size(shape));
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(payload.size() * sizeof(float))) {
    throw IoError(path.string() + ": truncated payload (" + std::to_string(in.gcount()) + " of " +
                  std::to_string(payload.size() * sizeof(float)) + " bytes)");
  }
  return Tensor<double>(shape, std::vector<double>(payload.begin(), payload.end()));
}

void write_raw_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_header(out, {labels.size()}, kDtypeInt64);
  std::vector<std::int64_t> payload(labels.begin(), labels.end());
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(std::int64_t)));
}

std::vector<int> read_raw_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const Shape shape = read_header(in, path, kDtypeInt64);
  if (shape.size() != 1) throw IoError(path.string() + ": labels must be rank 1");
  std::vector<std::int64_t> payload(shape[0]);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(std::int64_t)));
  if (in.gcount() != static_cast<std::streamsize>(payload.size() * sizeof(std::int64_t))) {
    throw IoError(path.string() + ": truncated payload");
  }
  return {payload.begin(), payload.end()};
}

void write_raw_dataset(const std::filesystem::path& dir, const DatasetSplit& split) {
  std::filesystem::create_directories(dir);
  write_raw_tensor(dir / "train_images.mngt", split.train.x);
  write_raw_labels(dir / "train_labels.mngt", split.train.y);
  write_raw_tensor(dir / "test_images.mngt", split.test.x);
  write_raw_labels(dir / "test_labels.mngt", split.test.y);
}

}  // namespace mngac
