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

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mngac/attacks.hpp"
#include "mngac/checkpoint.hpp"
#include "mngac/config.hpp"
#include "mngac/dataset.hpp"
#include "mngac/error.hpp"
#include "mngac/evaluation.hpp"
#include "mngac/losses.hpp"
#include "mngac/oracles.hpp"
#include "mngac/pipeline.hpp"
#include "mngac/trainer.hpp"

namespace fs = std::filesystem;
using namespace mngac;

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<AttackSpec> attacks_from_names(const std::string& list, std::size_t input_size) {
  std::vector<AttackSpec> out;
  for (const auto& name : split_list(list)) out.push_back(default_attack(name, input_size, false));
  if (out.empty()) throw InvalidArgument("--attacks names no attacks");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

struct ConfigArgs {
  std::string config;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON experiment config");
    cmd->add_option("--set", overrides, "Dotted-path override, e.g. trainer.beta=12")->take_all();
  }
  ExperimentConfig load() const { return load_config(config, overrides); }
};

int run_train(const ConfigArgs& args, const std::string& resume, std::size_t max_steps, std::size_t every,
              bool skip_eval) {
  std::optional<Experiment> run;
  if (!resume.empty()) {
    run.emplace(Experiment::resume(resume));
  } else {
    run.emplace(args.load());
  }
  const fs::path out = run->config().output_dir;
  fs::create_directories(out);
  save_config(out / "config.json", run->config());

  const fs::path log_path = out / "train_log.csv";
  const bool fresh = resume.empty() || !fs::exists(log_path);
  std::ofstream log(log_path, fresh ? std::ios::trunc : std::ios::app);
  if (fresh) write_training_log_header(log);
  const fs::path ck = out / "checkpoint.mngc";
  std::size_t since = 0;
  run->train(max_steps, [&](const StepRecord& r) {
    write_training_log_row(log, r);
    if (every > 0 && ++since == every) {
      run->save_checkpoint(ck);
      since = 0;
    }
  });
  log.flush();
  run->save_checkpoint(ck);
  std::cerr << "trained to step " << run->state().step << " of " << run->total_steps() << ", checkpoint " << ck
            << "\n";
  if (!skip_eval && run->finished()) {
    const Evaluation e = run->evaluate();
    write_evaluation(out / "eval", e, run->config().method);
    std::cout << format_table(std::vector<MetricsReport>{e.report}, std::vector<std::string>{run->config().method});
  }
  return 0;
}

int run_evaluate(const std::string& checkpoint, const std::string& attacks, const std::string& out_dir) {
  const Experiment run = Experiment::resume(checkpoint);
  std::optional<std::vector<AttackSpec>> suite;
  if (!attacks.empty()) suite = attacks_from_names(attacks, run.config().dataset.input_size());
  const Evaluation e = run.evaluate(suite);
  const fs::path out = out_dir.empty() ? fs::path(run.config().output_dir) / "eval" : fs::path(out_dir);
  write_evaluation(out, e, run.config().method);
  std::cout << format_table(std::vector<MetricsReport>{e.report}, std::vector<std::string>{run.config().method});
  std::cerr << "report written to " << out / "report.json" << "\n";
  return 0;
}

// Checks `analytic` against central differences on at most `max_coords`
// evenly spaced coordinates of `x`.
GradCheckReport check_subset(const std::function<double(std::span<const double>)>& f, std::vector<double> x,
                             std::span<const double> analytic, double h, double tolerance, std::size_t max_coords) {
  std::vector<std::size_t> coords(std::min(max_coords, x.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i * x.size() / coords.size();
  std::vector<double> sub(coords.size()), sub_analytic(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    sub[i] = x[coords[i]];
    sub_analytic[i] = analytic[coords[i]];
  }
  auto restricted = [&](std::span<const double> s) {
    std::vector<double> full = x;
    for (std::size_t i = 0; i < coords.size(); ++i) full[coords[i]] = s[i];
    return f(full);
  };
  GradCheckReport r = compare_gradients(sub_analytic, fd_gradient(restricted, sub, h), h, tolerance);
  r.worst_index = coords.empty() ? 0 : coords[r.worst_index];
  return r;
}

int run_gradcheck(const ConfigArgs& args, const std::string& target, double h, double tolerance,
                  std::size_t examples, std::size_t max_coords) {
  const ExperimentConfig cfg = args.load();
  const TrainState state = initial_state(cfg);
  const DatasetSplit data = load_dataset(cfg.dataset, cfg.seeds.data);
  std::vector<std::size_t> idx(std::min(examples, data.train.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Batch batch{gather_samples(data.train.x, idx), {}};
  for (std::size_t i : idx) batch.y.push_back(data.train.y[i]);
  const Classifier& model = state.classifier;
  Rng rng(cfg.seeds.attack);

  GradCheckReport report;
  if (target == "cls") {
    ParamSet<double> grad = zeros_like<double>(model.params());
    model.loss_param_grad(model.params(), batch.x, batch.y, grad);
    auto f = [&](std::span<const double> theta) {
      return cls_loss(model.logits(unflatten_params(theta, model.params()), batch.x), std::span<const int>(batch.y));
    };
    report = check_subset(f, flatten_params(model.params()), flatten_params(grad), h, tolerance, max_coords);
  } else if (target == "ac") {
    const std::size_t n = batch.size() * cfg.dataset.classes;
    std::vector<double> logits(3 * n);
    for (double& v : logits) v = 2.0 * rng.normal();
    auto split = [&](std::span<const double> all, std::size_t k) {
      return Tensor<double>({batch.size(), cfg.dataset.classes},
                            std::vector<double>(all.begin() + static_cast<std::ptrdiff_t>(k * n),
                                                all.begin() + static_cast<std::ptrdiff_t>((k + 1) * n)));
    };
    auto f = [&](std::span<const double> all) {
      return ac_loss_from_logits(split(all, 0), split(all, 1), split(all, 2), nullptr, nullptr, nullptr);
    };
    Tensor<double> d0, d1, d2;
    ac_loss_from_logits(split(logits, 0), split(logits, 1), split(logits, 2), &d0, &d1, &d2);
    std::vector<double> analytic;
    for (const auto* d : {&d0, &d1, &d2}) analytic.insert(analytic.end(), d->values().begin(), d->values().end());
    report = check_subset(f, logits, analytic, h, tolerance, max_coords);
  } else if (target == "meta") {
    const AttackSpec& attack = cfg.attacks.front();
    const Tensor<double> x_adv = run_attack(model, batch.x, batch.y, attack, rng);
    Rng noise(cfg.seeds.noise);
    const Tensor<double> z = sample_noise(batch.x.shape(), noise);
    const NormBallSpec ball = attack.kind == AttackKind::Pgd ? attack.ball : NormBallSpec{NormKind::Linf, 0.0};
    const double meta_lr = cfg.trainer.meta_lr > 0.0 ? cfg.trainer.meta_lr : cfg.trainer.max_lr;
    const auto& gen = state.generator;
    const ParamSet<double> grad = meta_gradient(model, gen, batch, x_adv, z, ball, meta_lr);
    auto f = [&](std::span<const double> phi) {
      return lookahead_loss(model, gen, unflatten_params(phi, gen.params()), batch, x_adv, z, ball, meta_lr);
    };
    report = check_subset(f, flatten_params(gen.params()), flatten_params(grad), h, tolerance, max_coords);
  } else {
    throw InvalidArgument("unknown gradcheck target '" + target + "' (cls, ac, meta)");
  }
  const nlohmann::json j = {{"target", target},           {"max_rel_err", report.max_rel_err},
                            {"worst_index", report.worst_index}, {"step_size", report.step_size},
                            {"tolerance", report.tolerance}, {"passed", report.passed}};
  fs::create_directories(cfg.output_dir);
  write_text(fs::path(cfg.output_dir) / ("gradcheck_" + target + ".json"), j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return report.passed ? 0 : 3;
}

int run_landscape(const std::string& checkpoint, std::size_t example, const std::string& norm, double extent,
                  std::size_t resolution, const std::string& out_dir) {
  const Experiment run = Experiment::resume(checkpoint);
  const Batch& test = run.data().test;
  if (example >= test.size()) throw InvalidArgument("--example is past the end of the test set");
  const NormKind p = parse_norm(norm);
  if (extent < 0.0) extent = default_attack("pgd-" + norm, run.config().dataset.input_size()).ball.epsilon;
  const std::size_t ref = (example + 1) % test.size();
  auto one = [&](std::size_t i) { return gather_samples(test.x, std::vector<std::size_t>{i}); };
  const Tensor<double> x = one(example);
  const LandscapeDirections dirs =
      landscape_directions(run.state().classifier, x, test.y[example], one(ref), test.y[ref], p);
  const LandscapeGrid grid =
      loss_landscape_grid(run.state().classifier, x, test.y[example], dirs.dir1, dirs.dir2, extent, resolution);
  const fs::path out = out_dir.empty() ? fs::path(run.config().output_dir) / "landscape" : fs::path(out_dir);
  fs::create_directories(out);
  const fs::path file = out / ("landscape_" + norm + "_" + std::to_string(example) + ".csv");
  write_grid_csv(file, grid);
  std::cerr << "grid written to " << file << "\n";
  return 0;
}

int run_beta_sweep(const ConfigArgs& args, const std::string& betas_text) {
  const ExperimentConfig cfg = args.load();
  std::vector<double> betas;
  for (const auto& b : split_list(betas_text)) betas.push_back(std::stod(b));
  const auto entries = beta_sweep(cfg, betas);
  std::vector<MetricsReport> reports;
  std::vector<std::string> labels;
  nlohmann::json all = nlohmann::json::array();
  for (const auto& e : entries) {
    std::ostringstream label;
    label << "beta=" << e.beta;
    labels.push_back(label.str());
    reports.push_back(e.report);
    all.push_back({{"beta", e.beta}, {"report", report_json(e.report)}});
  }
  fs::create_directories(cfg.output_dir);
  write_text(fs::path(cfg.output_dir) / "beta_sweep.json", all.dump(2) + "\n");
  const std::string table = format_table(reports, labels);
  write_text(fs::path(cfg.output_dir) / "beta_sweep.txt", table);
  std::cout << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-norm adversarial training with a meta-noise generator and consistency loss"};
  app.require_subcommand(1);

  ConfigArgs train_args, grad_args, sweep_args;
  std::string resume, checkpoint, attacks, out_dir, target = "meta", norm = "linf", betas = "0,4,8,12";
  std::size_t max_steps = std::numeric_limits<std::size_t>::max(), every = 0, examples = 4, coords = 50;
  std::size_t example = 0, resolution = 21;
  double h = 1e-5, tolerance = 1e-3, extent = -1.0;
  bool skip_eval = false;

  auto* train = app.add_subcommand("train", "Train a model and evaluate it");
  train_args.attach(train);
  train->add_option("--resume", resume, "Continue from a checkpoint");
  train->add_option("--max-steps", max_steps, "Stop after this many steps");
  train->add_option("--checkpoint-every", every, "Save a checkpoint every N steps");
  train->add_flag("--no-eval", skip_eval, "Skip evaluation after training");

  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--attacks", attacks, "Comma-separated attack names");
  eval->add_option("--out", out_dir, "Output directory");

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  grad_args.attach(grad);
  grad->add_option("--target", target, "cls, ac or meta");
  grad->add_option("--step", h, "Finite-difference step");
  grad->add_option("--tolerance", tolerance, "Maximum relative error");
  grad->add_option("--examples", examples, "Batch size used for the check");
  grad->add_option("--max-coords", coords, "Number of coordinates checked");

  auto* land = app.add_subcommand("landscape", "Export a loss landscape grid");
  land->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  land->add_option("--example", example, "Test example index");
  land->add_option("--norm", norm, "linf, l2 or l1");
  land->add_option("--extent", extent, "Half-width of the grid (default: the attack budget)");
  land->add_option("--resolution", resolution, "Grid points per axis");
  land->add_option("--out", out_dir, "Output directory");

  auto* sweep = app.add_subcommand("beta-sweep", "Train and evaluate one model per beta");
  sweep_args.attach(sweep);
  sweep->add_option("--betas", betas, "Comma-separated beta values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << app.help();
    return code;
  }

  try {
    if (*train) return run_train(train_args, resume, max_steps, every, skip_eval);
    if (*eval) return run_evaluate(checkpoint, attacks, out_dir);
    if (*grad) return run_gradcheck(grad_args, target, h, tolerance, examples, coords);
    if (*land) return run_landscape(checkpoint, example, norm, extent, resolution, out_dir);
    if (*sweep) return run_beta_sweep(sweep_args, betas);
  } catch (const std::exception& e) {
    std::cerr << "mngac: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
