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
#include <string>

#include "mngac/config.hpp"
#include "mngac/trainer.hpp"

namespace mngac {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Next batch to run: batch `batch` of epoch `epoch`.
struct TrainPosition {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  bool operator==(const TrainPosition&) const = default;
};

/// Builds the initial state of a run from its configuration and seeds.
TrainState initial_state(const ExperimentConfig& config);

/// Layout (little-endian): "MNGC", u32 version, u64 payload length, u64
/// payload checksum, payload. The payload holds the config JSON and its
/// fingerprint, the position and step counter, theta, phi, both momentum
/// buffers and both random stream states. Parameters are stored as float64 so
/// a restored run continues bit-identically.
///
/// Written to a temporary file then renamed over `path`.
void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& config, const TrainState& state,
                     const TrainPosition& position);

struct LoadedCheckpoint {
  ExperimentConfig config;
  std::string fingerprint;
  TrainPosition position;
  TrainState state;
};

/// Throws VersionError on a version mismatch and IoError on a bad magic,
/// length or checksum.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mngac
