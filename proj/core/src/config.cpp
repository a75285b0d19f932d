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

#include "mngac/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace mngac {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument("config: '" + where + "' must be an object");
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw InvalidArgument("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument("config: '" + where + "." + key + "' has the wrong type");
  }
}

std::vector<AttackSpec> read_attacks(const json& j, const char* key, std::size_t input_size, bool training,
                                     std::vector<AttackSpec> fallback) {
  if (!j.contains(key)) return fallback;
  const json& list = j.at(key);
  if (!list.is_array()) throw InvalidArgument(std::string("config: '") + key + "' must be an array");
  std::vector<AttackSpec> out;
  for (const auto& entry : list) {
    out.push_back(entry.is_string() ? default_attack(entry.get<std::string>(), input_size, training)
                                    : attack_from_json(entry, input_size, training));
  }
  return out;
}

std::vector<AttackSpec> default_suite(std::size_t input_size, bool training) {
  std::vector<AttackSpec> out;
  for (const char* name : {"pgd-linf", "pgd-l1", "pgd-l2"}) out.push_back(default_attack(name, input_size, training));
  return out;
}

}  // namespace

json attack_to_json(const AttackSpec& a) {
  if (a.kind == AttackKind::SaltPepper) {
    return {{"name", a.name}, {"max_fraction", a.max_fraction}, {"trials", a.trials}};
  }
  return {{"name", a.name},           {"epsilon", a.ball.epsilon}, {"step_size", a.step_size},
          {"steps", a.steps},         {"random_init", a.random_init}, {"sparsity", a.sparsity}};
}

AttackSpec attack_from_json(const json& j, std::size_t input_size, bool training) {
  require_object(j, "attack");
  if (!j.contains("name")) throw InvalidArgument("config: attack entry needs a 'name'");
  const std::string name = j.at("name").get<std::string>();
  AttackSpec a = default_attack(name, input_size, training);
  const std::string where = "attack[" + name + "]";
  if (a.kind == AttackKind::SaltPepper) {
    reject_unknown(j, {"name", "max_fraction", "trials"}, where);
    read(j, "max_fraction", a.max_fraction, where);
    read(j, "trials", a.trials, where);
  } else {
    reject_unknown(j, {"name", "epsilon", "step_size", "steps", "random_init", "sparsity"}, where);
    read(j, "epsilon", a.ball.epsilon, where);
    read(j, "step_size", a.step_size, where);
    read(j, "steps", a.steps, where);
    read(j, "random_init", a.random_init, where);
    read(j, "sparsity", a.sparsity, where);
  }
  a.validate();
  return a;
}

void ExperimentConfig::validate() const {
  const Method m = parse_method(method);
  parse_arch(model.arch);
  parse_noise_source(trainer.noise_source);
  if (dataset.name != "blobs" && dataset.name != "moons" && dataset.name != "raw") {
    throw InvalidArgument("config: dataset.name must be blobs, moons or raw");
  }
  if (dataset.channels == 0 || dataset.height == 0 || dataset.width == 0) {
    throw InvalidArgument("config: dataset dims must be positive");
  }
  if (dataset.classes < 2) throw InvalidArgument("config: dataset.classes must be >= 2");
  if (dataset.name == "moons" && dataset.classes != 2) throw InvalidArgument("config: moons has exactly 2 classes");
  if (dataset.radius < 0.0 || dataset.jitter < 0.0 || dataset.noise < 0.0) {
    throw InvalidArgument("config: dataset radius, jitter and noise must be >= 0");
  }
  if (dataset.train_size == 0 || dataset.test_size == 0) throw InvalidArgument("config: dataset sizes must be positive");
  if (trainer.batch_size == 0) throw InvalidArgument("config: trainer.batch_size must be >= 1");
  if (eval_batch_size == 0) throw InvalidArgument("config: eval_batch_size must be >= 1");
  if (trainer.epochs < 1) throw InvalidArgument("config: trainer.epochs must be >= 1");
  if (!(trainer.max_lr > 0.0)) throw InvalidArgument("config: trainer.max_lr must be > 0");
  if (!(trainer.beta >= 0.0)) throw InvalidArgument("config: trainer.beta must be >= 0");
  if (m != Method::Nat && attacks.empty()) throw InvalidArgument("config: attacks must not be empty");
  if (m == Method::AdvSingle && attacks.size() != 1) {
    throw InvalidArgument("config: adv_single needs exactly one training attack");
  }
  for (const auto& a : attacks) a.validate();
  if (eval_attacks.empty()) throw InvalidArgument("config: eval_attacks must not be empty");
  for (const auto& a : eval_attacks) a.validate();
}

TrainOptions ExperimentConfig::train_options() const {
  TrainOptions o;
  o.beta = trainer.beta;
  o.noise = parse_noise_source(trainer.noise_source);
  o.theta = {trainer.momentum, trainer.weight_decay};
  o.phi = {trainer.generator_momentum, 0.0};
  o.meta_lr = trainer.meta_lr;
  o.generator_lr = trainer.generator_lr;
  return o;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.attacks = default_suite(c.dataset.input_size(), true);
  c.eval_attacks = default_suite(c.dataset.input_size(), false);
  return c;
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j, {"method", "dataset", "model", "generator", "attacks", "eval_attacks", "trainer", "seeds",
                     "eval_batch_size", "output_dir"},
                 "");
  ExperimentConfig c;
  read(j, "method", c.method, "");
  read(j, "eval_batch_size", c.eval_batch_size, "");
  read(j, "output_dir", c.output_dir, "");
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown(d, {"name", "train_size", "test_size", "channels", "height", "width", "classes", "path", "noise",
                       "contrast", "radius", "jitter", "texture"},
                   "dataset");
    read(d, "name", c.dataset.name, "dataset");
    read(d, "train_size", c.dataset.train_size, "dataset");
    read(d, "test_size", c.dataset.test_size, "dataset");
    read(d, "channels", c.dataset.channels, "dataset");
    read(d, "height", c.dataset.height, "dataset");
    read(d, "width", c.dataset.width, "dataset");
    read(d, "classes", c.dataset.classes, "dataset");
    read(d, "path", c.dataset.path, "dataset");
    read(d, "noise", c.dataset.noise, "dataset");
    read(d, "contrast", c.dataset.contrast, "dataset");
    read(d, "radius", c.dataset.radius, "dataset");
    read(d, "jitter", c.dataset.jitter, "dataset");
    read(d, "texture", c.dataset.texture, "dataset");
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, {"arch", "hidden"}, "model");
    read(m, "arch", c.model.arch, "model");
    read(m, "hidden", c.model.hidden, "model");
  }
  if (j.contains("generator")) {
    const json& g = j.at("generator");
    reject_unknown(g, {"hidden", "slope"}, "generator");
    read(g, "hidden", c.generator.hidden, "generator");
    read(g, "slope", c.generator.slope, "generator");
  }
  if (j.contains("trainer")) {
    const json& t = j.at("trainer");
    reject_unknown(t, {"beta", "max_lr", "momentum", "weight_decay", "epochs", "batch_size", "meta_lr", "generator_lr",
                       "generator_momentum", "noise_source"},
                   "trainer");
    read(t, "beta", c.trainer.beta, "trainer");
    read(t, "max_lr", c.trainer.max_lr, "trainer");
    read(t, "momentum", c.trainer.momentum, "trainer");
    read(t, "weight_decay", c.trainer.weight_decay, "trainer");
    read(t, "epochs", c.trainer.epochs, "trainer");
    read(t, "batch_size", c.trainer.batch_size, "trainer");
    read(t, "meta_lr", c.trainer.meta_lr, "trainer");
    read(t, "generator_lr", c.trainer.generator_lr, "trainer");
    read(t, "generator_momentum", c.trainer.generator_momentum, "trainer");
    read(t, "noise_source", c.trainer.noise_source, "trainer");
  }
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    reject_unknown(s, {"data", "attack", "noise", "init"}, "seeds");
    read(s, "data", c.seeds.data, "seeds");
    read(s, "attack", c.seeds.attack, "seeds");
    read(s, "noise", c.seeds.noise, "seeds");
    read(s, "init", c.seeds.init, "seeds");
  }
  const std::size_t d = c.dataset.input_size();
  c.attacks = read_attacks(j, "attacks", d, true, default_suite(d, true));
  c.eval_attacks = read_attacks(j, "eval_attacks", d, false, default_suite(d, false));
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json attacks = json::array(), eval = json::array();
  for (const auto& a : c.attacks) attacks.push_back(attack_to_json(a));
  for (const auto& a : c.eval_attacks) eval.push_back(attack_to_json(a));
  return {
      {"method", c.method},
      {"dataset",
       {{"name", c.dataset.name},
        {"train_size", c.dataset.train_size},
        {"test_size", c.dataset.test_size},
        {"channels", c.dataset.channels},
        {"height", c.dataset.height},
        {"width", c.dataset.width},
        {"classes", c.dataset.classes},
        {"path", c.dataset.path},
        {"noise", c.dataset.noise},
        {"contrast", c.dataset.contrast},
        {"radius", c.dataset.radius},
        {"jitter", c.dataset.jitter},
        {"texture", c.dataset.texture}}},
      {"model", {{"arch", c.model.arch}, {"hidden", c.model.hidden}}},
      {"generator", {{"hidden", c.generator.hidden}, {"slope", c.generator.slope}}},
      {"attacks", attacks},
      {"eval_attacks", eval},
      {"trainer",
       {{"beta", c.trainer.beta},
        {"max_lr", c.trainer.max_lr},
        {"momentum", c.trainer.momentum},
        {"weight_decay", c.trainer.weight_decay},
        {"epochs", c.trainer.epochs},
        {"batch_size", c.trainer.batch_size},
        {"meta_lr", c.trainer.meta_lr},
        {"generator_lr", c.trainer.generator_lr},
        {"generator_momentum", c.trainer.generator_momentum},
        {"noise_source", c.trainer.noise_source}}},
      {"seeds",
       {{"data", c.seeds.data}, {"attack", c.seeds.attack}, {"noise", c.seeds.noise}, {"init", c.seeds.init}}},
      {"eval_batch_size", c.eval_batch_size},
      {"output_dir", c.output_dir},
  };
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InvalidArgument("override '" + assignment + "' must look like key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &j;
  std::istringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i < path.size(); ++i) {
    const bool last = i + 1 == path.size();
    if (node->is_array()) {
      std::size_t index = 0;
      try {
        index = std::stoul(path[i]);
      } catch (const std::exception&) {
        throw InvalidArgument("override '" + key + "': '" + path[i] + "' is not an array index");
      }
      if (index >= node->size()) throw InvalidArgument("override '" + key + "': index out of range");
      node = &(*node)[index];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw InvalidArgument("override '" + key + "': '" + path[i] + "' is not inside an object");
      node = &(*node)[path[i]];
    }
    if (last) *node = value;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path.string());
  out << config_to_json(config).dump(2) << '\n';
}

std::string config_fingerprint(const ExperimentConfig& config) {
  json j = config_to_json(config);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mngac
