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

#include "mngac/pipeline.hpp"

#include <fstream>

#include "mngac/error.hpp"
#include "mngac/rng.hpp"

namespace mngac {

namespace {

ExperimentConfig validated(ExperimentConfig config) {
  config.validate();
  return config;
}

}  // namespace

Experiment::Experiment(ExperimentConfig config)
    : Experiment(validated(config), initial_state(config), TrainPosition{}) {}

Experiment::Experiment(ExperimentConfig config, TrainState state, TrainPosition position)
    : config_(validated(std::move(config))),
      method_(config_.parsed_method()),
      options_(config_.train_options()),
      data_(std::make_unique<DatasetSplit>(load_dataset(config_.dataset, config_.seeds.data))),
      stream_(std::make_unique<BatchStream>(data_->train, config_.trainer.batch_size,
                                            derive_seed(config_.seeds.data, 1))),
      state_(std::move(state)),
      position_(position) {
  if (!config_.attacks.empty()) set_.emplace(config_.attacks);
  if (position_.batch >= stream_->batches_per_epoch()) throw InvalidArgument("train position past end of epoch");
}

Experiment Experiment::resume(const std::filesystem::path& checkpoint) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  return Experiment(std::move(ck.config), std::move(ck.state), ck.position);
}

std::size_t Experiment::total_steps() const {
  return static_cast<std::size_t>(config_.trainer.epochs) * batches_per_epoch();
}

bool Experiment::finished() const { return position_.epoch >= static_cast<std::size_t>(config_.trainer.epochs); }

double Experiment::current_lr() const {
  const double fractional = static_cast<double>(position_.epoch) +
                            (static_cast<double>(position_.batch) + 0.5) / static_cast<double>(batches_per_epoch());
  return lr_at(config_.schedule(), fractional);
}

StepRecord Experiment::step() {
  if (finished()) throw InvalidArgument("training already finished");
  StepRecord record;
  record.position = position_;
  record.lr = current_lr();
  const Batch batch = stream_->batch(position_.epoch, position_.batch);
  if (method_ == Method::Nat) {
    record.stats = nat_step(state_, batch, record.lr, options_);
  } else {
    record.stats = train_step(method_, state_, batch, *set_, record.lr, options_);
  }
  record.step = state_.step;
  if (++position_.batch == batches_per_epoch()) {
    position_.batch = 0;
    ++position_.epoch;
  }
  return record;
}

void Experiment::train(std::size_t max_steps, const std::function<void(const StepRecord&)>& on_step) {
  for (std::size_t i = 0; i < max_steps && !finished(); ++i) {
    const StepRecord r = step();
    if (on_step) on_step(r);
  }
}

Evaluation Experiment::evaluate(std::optional<std::vector<AttackSpec>> suite) const {
  const std::vector<AttackSpec>& attacks = suite ? *suite : config_.eval_attacks;
  Evaluation e = mngac::evaluate(state_.classifier, data_->test, attacks, evaluation_seed(config_),
                                 config_.eval_batch_size);
  e.report.config_fingerprint = config_fingerprint(config_);
  return e;
}

void Experiment::save_checkpoint(const std::filesystem::path& path) const {
  mngac::save_checkpoint(path, config_, state_, position_);
}

std::uint64_t evaluation_seed(const ExperimentConfig& config) { return derive_seed(config.seeds.attack, 0xe7a1); }

void write_evaluation(const std::filesystem::path& dir, const Evaluation& evaluation, const std::string& label) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out << text;
  };
  write("report.json", report_json(evaluation.report).dump(2) + "\n");
  write("timing.json", timing_json(evaluation.report).dump(2) + "\n");
  const std::vector<MetricsReport> reports{evaluation.report};
  const std::vector<std::string> labels{label};
  write("report.txt", format_table(reports, labels));
  write_matrix_csv(dir / "matrix.csv", evaluation.matrix);
}

void write_training_log_header(std::ostream& out) {
  out << "step,epoch,batch,lr,loss,attack_calls,attack_index,attack_seconds,meta_seconds,update_seconds\n";
}

void write_training_log_row(std::ostream& out, const StepRecord& r) {
  out << r.step << ',' << r.position.epoch << ',' << r.position.batch << ',' << r.lr << ',' << r.stats.loss << ','
      << r.stats.attack_calls << ',' << r.stats.attack_index << ',' << r.stats.attack_seconds << ','
      << r.stats.meta_seconds << ',' << r.stats.update_seconds << '\n';
}

std::vector<SweepEntry> beta_sweep(const ExperimentConfig& config, std::span<const double> betas,
                                   const std::function<void(double, const StepRecord&)>& on_step) {
  if (betas.empty()) throw InvalidArgument("beta sweep needs at least one beta");
  std::vector<SweepEntry> out;
  for (double beta : betas) {
    ExperimentConfig c = config;
    c.method = method_name(Method::MngAc);
    c.trainer.beta = beta;
    Experiment run(c);
    run.train(std::numeric_limits<std::size_t>::max(), [&](const StepRecord& r) {
      if (on_step) on_step(beta, r);
    });
    out.push_back({beta, run.evaluate().report});
  }
  return out;
}

}  // namespace mngac
