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
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "mngac/checkpoint.hpp"
#include "mngac/config.hpp"
#include "mngac/dataset.hpp"
#include "mngac/evaluation.hpp"
#include "mngac/trainer.hpp"

namespace mngac {

struct StepRecord {
  std::uint64_t step = 0;
  TrainPosition position;  // batch that was run
  double lr = 0.0;
  StepStats stats;
};

/// One training run: data, state and schedule position.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config);
  /// Continues a run from a checkpoint; the data is regenerated from the
  /// stored config.
  static Experiment resume(const std::filesystem::path& checkpoint);

  const ExperimentConfig& config() const { return config_; }
  const DatasetSplit& data() const { return *data_; }
  TrainState& state() { return state_; }
  const TrainState& state() const { return state_; }
  const TrainPosition& position() const { return position_; }

  std::size_t batches_per_epoch() const { return stream_->batches_per_epoch(); }
  std::size_t total_steps() const;
  bool finished() const;

  /// Learning rate at the middle of the current batch.
  double current_lr() const;
  /// Runs the next batch.
  StepRecord step();
  /// Runs up to `max_steps` more steps (until the end by default).
  void train(std::size_t max_steps = std::numeric_limits<std::size_t>::max(),
             const std::function<void(const StepRecord&)>& on_step = {});

  /// Evaluates on the test split with `suite`, or the configured eval attacks.
  Evaluation evaluate(std::optional<std::vector<AttackSpec>> suite = {}) const;

  void save_checkpoint(const std::filesystem::path& path) const;

 private:
  Experiment(ExperimentConfig config, TrainState state, TrainPosition position);

  ExperimentConfig config_;
  Method method_;
  TrainOptions options_;
  // Heap-held so the stream's reference survives moves of the experiment.
  std::unique_ptr<DatasetSplit> data_;
  std::unique_ptr<BatchStream> stream_;
  std::optional<PerturbationSet> set_;
  TrainState state_;
  TrainPosition position_;
};

/// Seed used for evaluation attacks of a run.
std::uint64_t evaluation_seed(const ExperimentConfig& config);

/// Writes report.json, timing.json, report.txt and matrix.csv into `dir`.
void write_evaluation(const std::filesystem::path& dir, const Evaluation& evaluation, const std::string& label);

void write_training_log_header(std::ostream& out);
void write_training_log_row(std::ostream& out, const StepRecord& record);

struct SweepEntry {
  double beta = 0.0;
  MetricsReport report;
};

/// Trains and evaluates one run per beta, all from the same seeds.
std::vector<SweepEntry> beta_sweep(const ExperimentConfig& config, std::span<const double> betas,
                                   const std::function<void(double, const StepRecord&)>& on_step = {});

}  // namespace mngac
