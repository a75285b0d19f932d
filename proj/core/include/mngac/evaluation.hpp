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
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mngac/attacks.hpp"
#include "mngac/models.hpp"

namespace mngac {

/// Per-example correctness: one row per test example, one column per attack.
struct CorrectnessMatrix {
  std::vector<std::string> attacks;
  std::vector<NormKind> groups;  // norm group of each column
  std::vector<std::uint8_t> clean;
  std::vector<std::uint8_t> cells;  // row-major, rows x attacks.size()

  std::size_t rows() const { return clean.size(); }
  bool at(std::size_t row, std::size_t col) const { return cells[row * attacks.size() + col] != 0; }
};

struct MetricsReport {
  std::size_t examples = 0;
  double acc_clean = 0.0;
  std::vector<std::string> attacks;  // suite order
  std::vector<double> per_attack;    // aligned with `attacks`
  /// Fraction correct under every attack.
  double acc_union = 0.0;
  /// Mean of the per-attack accuracies; `acc_avg_attacks` is the same value.
  double acc_avg = 0.0;
  double acc_avg_attacks = 0.0;
  /// Mean over norm groups of the within-group union accuracy.
  double acc_avg_norm_groups = 0.0;
  double wall_time_seconds = 0.0;
  std::string config_fingerprint;

  double attack_accuracy(const std::string& name) const;
};

/// Reduces a correctness matrix to the report's accuracy fields.
MetricsReport summarize(const CorrectnessMatrix& matrix);

struct Evaluation {
  MetricsReport report;
  CorrectnessMatrix matrix;
};

/// Runs every attack in `suite` on every example of `data`, `batch_size`
/// examples at a time. Attack k draws from its own stream seeded by
/// derive_seed(seed, k). The model is only read.
Evaluation evaluate(const Classifier& model, const Batch& data, std::span<const AttackSpec> suite,
                    std::uint64_t seed, std::size_t batch_size = 128);

/// Machine-readable report. Wall time is excluded so that reruns of the same
/// configuration produce byte-identical files; see `timing_json`.
nlohmann::json report_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);
nlohmann::json timing_json(const MetricsReport& report);

/// Aligned text table, one row per report, labelled by `labels`.
std::string format_table(std::span<const MetricsReport> reports, std::span<const std::string> labels);

void write_matrix_csv(const std::filesystem::path& path, const CorrectnessMatrix& matrix);
CorrectnessMatrix read_matrix_csv(const std::filesystem::path& path);

/// Value written for cells whose loss is not finite.
inline constexpr double kLandscapeSentinel = -1.0;

struct LandscapeGrid {
  std::size_t resolution = 0;
  double extent = 0.0;
  /// values[i * resolution + j] = loss(x + a_i * dir1 + b_j * dir2),
  /// a_i, b_j evenly spaced in [-extent, extent].
  std::vector<double> values;

  double coordinate(std::size_t i) const;
};

struct LandscapeDirections {
  Tensor<double> dir1;
  Tensor<double> dir2;
};

/// dir1: unit-p-norm steepest ascent direction of the loss at `example`.
/// dir2: the loss gradient at `reference`, orthogonalized against dir1 and
/// rescaled to unit p-norm.
LandscapeDirections landscape_directions(const Classifier& model, const Tensor<double>& example, int label,
                                         const Tensor<double>& reference, int reference_label, NormKind p);

LandscapeGrid loss_landscape_grid(const Classifier& model, const Tensor<double>& example, int label,
                                  const Tensor<double>& dir1, const Tensor<double>& dir2, double extent,
                                  std::size_t resolution);

void write_grid_csv(const std::filesystem::path& path, const LandscapeGrid& grid);

}  // namespace mngac
