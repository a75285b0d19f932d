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
#include "mngac/trainer.hpp"

namespace mngac {

struct DatasetConfig {
  /// "blobs", "moons" or "raw" (files under `path`).
  std::string name = "blobs";
  std::size_t train_size = 512;
  std::size_t test_size = 256;
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t classes = 10;
  std::string path;
  /// Synthetic generators: per-pixel Gaussian noise level.
  double noise = 0.1;
  /// Synthetic generators: amplitude of the class blob.
  double contrast = 0.4;
  /// Blob width in pixels; 0 means a sixth of the image side.
  double radius = 0.0;
  /// Standard deviation of the blob position, in pixels.
  double jitter = 0.5;
  /// blobs only: amplitude of a dense per-class +/- texture over every pixel.
  double texture = 0.0;

  std::size_t input_size() const { return channels * height * width; }
  bool operator==(const DatasetConfig&) const = default;
};

struct ModelConfig {
  std::string arch = "small_cnn";
  std::size_t hidden = 8;
  bool operator==(const ModelConfig&) const = default;
};

struct GeneratorConfig {
  std::size_t hidden = 32;
  double slope = 0.01;
  bool operator==(const GeneratorConfig&) const = default;
};

struct TrainerConfig {
  double beta = 12.0;
  double max_lr = 0.21;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 30;
  std::size_t batch_size = 128;
  /// Negative: tied to the scheduled learning rate.
  double meta_lr = -1.0;
  double generator_lr = -1.0;
  double generator_momentum = 0.0;
  std::string noise_source = "generator";
  bool operator==(const TrainerConfig&) const = default;
};

struct SeedConfig {
  std::uint64_t data = 0;
  std::uint64_t attack = 1;
  std::uint64_t noise = 2;
  std::uint64_t init = 3;
  bool operator==(const SeedConfig&) const = default;
};

/// Declarative run definition. Attack entries name a registry attack; fields
/// left out of the JSON take the registry defaults for the dataset's input size.
struct ExperimentConfig {
  std::string method = "mng_ac";
  DatasetConfig dataset;
  ModelConfig model;
  GeneratorConfig generator;
  std::vector<AttackSpec> attacks;
  std::vector<AttackSpec> eval_attacks;
  TrainerConfig trainer;
  SeedConfig seeds;
  std::size_t eval_batch_size = 128;
  std::string output_dir = "runs/default";

  bool operator==(const ExperimentConfig&) const = default;

  /// Throws InvalidArgument on any inconsistent field.
  void validate() const;

  Method parsed_method() const { return parse_method(method); }
  TrainOptions train_options() const;
  LrSchedule schedule() const { return {trainer.max_lr, static_cast<double>(trainer.epochs)}; }
  PerturbationSet perturbation_set() const { return PerturbationSet(attacks); }
};

/// Built-in defaults with the three PGD attacks for training and evaluation.
ExperimentConfig default_config();

/// Strict parse: every key must be known at every level.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Applies `key=value` with a dotted key (array elements by index). The value
/// is parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Reads a JSON file, applies overrides in order, then parses strictly.
ExperimentConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});
void save_config(const std::filesystem::path& path, const ExperimentConfig& config);

/// Hash of the canonical JSON with `output_dir` removed, as 16 hex digits.
std::string config_fingerprint(const ExperimentConfig& config);

nlohmann::json attack_to_json(const AttackSpec& spec);
AttackSpec attack_from_json(const nlohmann::json& j, std::size_t input_size, bool training);

}  // namespace mngac
