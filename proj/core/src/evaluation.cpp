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

#include "mngac/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "mngac/losses.hpp"

namespace mngac {

double MetricsReport::attack_accuracy(const std::string& name) const {
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    if (attacks[i] == name) return per_attack[i];
  }
  throw InvalidArgument("report has no attack named '" + name + "'");
}

MetricsReport summarize(const CorrectnessMatrix& m) {
  const std::size_t rows = m.rows(), cols = m.attacks.size();
  if (m.cells.size() != rows * cols || m.groups.size() != cols) {
    throw InvalidArgument("correctness matrix dimensions are inconsistent");
  }
  MetricsReport r;
  r.examples = rows;
  r.attacks = m.attacks;
  r.per_attack.assign(cols, 0.0);
  if (rows == 0) return r;
  const double inv = 1.0 / static_cast<double>(rows);
  std::size_t clean = 0, union_hits = 0;
  std::map<NormKind, std::size_t> group_hits;
  for (std::size_t c = 0; c < cols; ++c) group_hits[m.groups[c]] = 0;
  for (std::size_t row = 0; row < rows; ++row) {
    clean += m.clean[row];
    bool all = true;
    std::map<NormKind, bool> group_all;
    for (std::size_t c = 0; c < cols; ++c) {
      const bool ok = m.at(row, c);
      if (ok) r.per_attack[c] += 1.0;
      all = all && ok;
      auto [it, inserted] = group_all.emplace(m.groups[c], ok);
      if (!inserted) it->second = it->second && ok;
    }
    union_hits += all;
    for (const auto& [g, ok] : group_all) group_hits[g] += ok;
  }
  r.acc_clean = static_cast<double>(clean) * inv;
  for (double& a : r.per_attack) a *= inv;
  if (cols > 0) {
    r.acc_union = static_cast<double>(union_hits) * inv;
    r.acc_avg_attacks = std::accumulate(r.per_attack.begin(), r.per_attack.end(), 0.0) / static_cast<double>(cols);
    double groups = 0.0;
    for (const auto& [g, hits] : group_hits) groups += static_cast<double>(hits) * inv;
    r.acc_avg_norm_groups = groups / static_cast<double>(group_hits.size());
  }
  r.acc_avg = r.acc_avg_attacks;
  return r;
}

Evaluation evaluate(const Classifier& model, const Batch& data, std::span<const AttackSpec> suite, std::uint64_t seed,
                    std::size_t batch_size) {
  if (suite.empty()) throw InvalidArgument("evaluate: attack suite is empty");
  if (batch_size == 0) throw InvalidArgument("evaluate: batch size must be positive");
  const auto start = std::chrono::steady_clock::now();
  CorrectnessMatrix m;
  for (const auto& a : suite) {
    a.validate();
    m.attacks.push_back(a.name);
    m.groups.push_back(a.kind == AttackKind::SaltPepper ? NormKind::L1 : a.ball.p);
  }
  const std::size_t n = data.size(), cols = suite.size();
  m.clean.assign(n, 0);
  m.cells.assign(n * cols, 0);
  std::vector<Rng> streams;
  for (std::size_t k = 0; k < cols; ++k) streams.emplace_back(derive_seed(seed, k));

  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Tensor<double> x = gather_samples(data.x, idx);
    const std::span<const int> y(data.y.data() + begin, end - begin);
    const auto clean_pred = predictions(model.logits(x));
    for (std::size_t i = 0; i < idx.size(); ++i) m.clean[begin + i] = clean_pred[i] == y[i];
    for (std::size_t k = 0; k < cols; ++k) {
      Tensor<double> adv;
      try {
        adv = run_attack(model, x, y, suite[k], streams[k]);
      } catch (const std::exception& e) {
        throw NumericError("evaluate: attack " + suite[k].name + " failed on examples [" + std::to_string(begin) +
                           ", " + std::to_string(end) + "): " + e.what());
      }
      const auto pred = predictions(model.logits(adv));
      for (std::size_t i = 0; i < idx.size(); ++i) m.cells[(begin + i) * cols + k] = pred[i] == y[i];
    }
  }
  Evaluation out{summarize(m), std::move(m)};
  out.report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

nlohmann::json report_json(const MetricsReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t i = 0; i < r.attacks.size(); ++i) per[r.attacks[i]] = r.per_attack[i];
  return {
      {"examples", r.examples},
      {"acc_clean", r.acc_clean},
      {"attacks", r.attacks},
      {"per_attack", per},
      {"acc_union", r.acc_union},
      {"acc_avg", r.acc_avg},
      {"acc_avg_attacks", r.acc_avg_attacks},
      {"acc_avg_norm_groups", r.acc_avg_norm_groups},
      {"config_fingerprint", r.config_fingerprint},
  };
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.examples = j.at("examples").get<std::size_t>();
  r.acc_clean = j.at("acc_clean").get<double>();
  r.attacks = j.at("attacks").get<std::vector<std::string>>();
  for (const auto& a : r.attacks) r.per_attack.push_back(j.at("per_attack").at(a).get<double>());
  r.acc_union = j.at("acc_union").get<double>();
  r.acc_avg = j.at("acc_avg").get<double>();
  r.acc_avg_attacks = j.at("acc_avg_attacks").get<double>();
  r.acc_avg_norm_groups = j.at("acc_avg_norm_groups").get<double>();
  r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  if (j.contains("wall_time_seconds")) r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
  return r;
}

nlohmann::json timing_json(const MetricsReport& r) {
  return {{"wall_time_seconds", r.wall_time_seconds}, {"config_fingerprint", r.config_fingerprint}};
}

std::string format_table(std::span<const MetricsReport> reports, std::span<const std::string> labels) {
  if (reports.size() != labels.size()) throw InvalidArgument("format_table: one label per report");
  std::vector<std::string> columns = {"run", "clean"};
  std::vector<std::string> attack_cols;
  for (const auto& r : reports) {
    for (const auto& a : r.attacks) {
      if (std::find(attack_cols.begin(), attack_cols.end(), a) == attack_cols.end()) attack_cols.push_back(a);
    }
  }
  columns.insert(columns.end(), attack_cols.begin(), attack_cols.end());
  columns.insert(columns.end(), {"union", "avg", "avg_groups"});

  std::vector<std::vector<std::string>> rows;
  auto pct = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << 100.0 * v;
    return s.str();
  };
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::vector<std::string> row = {labels[i], pct(r.acc_clean)};
    for (const auto& a : attack_cols) {
      const auto it = std::find(r.attacks.begin(), r.attacks.end(), a);
      row.push_back(it == r.attacks.end() ? "-" : pct(r.per_attack[static_cast<std::size_t>(it - r.attacks.begin())]));
    }
    row.push_back(pct(r.acc_union));
    row.push_back(pct(r.acc_avg));
    row.push_back(pct(r.acc_avg_norm_groups));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    width[c] = columns[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << "  ";
      if (c == 0) {
        out << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        out << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    out << '\n';
  };
  emit(columns);
  for (const auto& row : rows) emit(row);
  return out.str();
}

void write_matrix_csv(const std::filesystem::path& path, const CorrectnessMatrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "example,clean";
  for (std::size_t c = 0; c < m.attacks.size(); ++c) out << ',' << m.attacks[c] << ':' << norm_name(m.groups[c]);
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << r << ',' << static_cast<int>(m.clean[r]);
    for (std::size_t c = 0; c < m.attacks.size(); ++c) out << ',' << static_cast<int>(m.at(r, c));
    out << '\n';
  }
}

CorrectnessMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  CorrectnessMatrix m;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty matrix file");
  {
    std::istringstream header(line);
    std::string cell;
    std::getline(header, cell, ',');
    std::getline(header, cell, ',');
    while (std::getline(header, cell, ',')) {
      const auto colon = cell.rfind(':');
      if (colon == std::string::npos) throw IoError(path.string() + ": malformed column '" + cell + "'");
      m.attacks.push_back(cell.substr(0, colon));
      m.groups.push_back(parse_norm(cell.substr(colon + 1)));
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    std::getline(row, cell, ',');
    m.clean.push_back(static_cast<std::uint8_t>(std::stoi(cell)));
    std::size_t cols = 0;
    while (std::getline(row, cell, ',')) {
      m.cells.push_back(static_cast<std::uint8_t>(std::stoi(cell)));
      ++cols;
    }
    if (cols != m.attacks.size()) throw IoError(path.string() + ": row has the wrong number of columns");
  }
  return m;
}

double LandscapeGrid::coordinate(std::size_t i) const {
  if (resolution < 2) return 0.0;
  const double span = static_cast<double>(resolution - 1);
  return extent * (2.0 * static_cast<double>(i) - span) / span;
}

LandscapeDirections landscape_directions(const Classifier& model, const Tensor<double>& example, int label,
                                         const Tensor<double>& reference, int reference_label, NormKind p) {
  Tensor<double> g1, g2;
  const int y1[] = {label};
  const int y2[] = {reference_label};
  model.loss_input_grad(example, y1, &g1);
  model.loss_input_grad(reference, y2, &g2);
  LandscapeDirections d;
  d.dir1 = steepest_direction(g1, p, 1.0);
  double dot = 0.0, self = 0.0;
  for (std::size_t i = 0; i < g2.size(); ++i) {
    dot += g2[i] * d.dir1[i];
    self += d.dir1[i] * d.dir1[i];
  }
  d.dir2 = g2;
  if (self > 0.0) {
    for (std::size_t i = 0; i < g2.size(); ++i) d.dir2[i] -= dot / self * d.dir1[i];
  }
  const double norm = ball_norm(Tensor<double>(d.dir2.shape()), d.dir2, p)[0];
  if (norm > 0.0) {
    for (double& v : d.dir2.values()) v /= norm;
  }
  return d;
}

LandscapeGrid loss_landscape_grid(const Classifier& model, const Tensor<double>& example, int label,
                                  const Tensor<double>& dir1, const Tensor<double>& dir2, double extent,
                                  std::size_t resolution) {
  if (resolution < 3) throw InvalidArgument("landscape resolution must be >= 3");
  if (example.batch() != 1) throw InvalidArgument("landscape expects a single example");
  require_same_shape(example, dir1, "landscape dir1");
  require_same_shape(example, dir2, "landscape dir2");
  if (!(extent >= 0.0)) throw InvalidArgument("landscape extent must be >= 0");
  LandscapeGrid grid;
  grid.resolution = resolution;
  grid.extent = extent;
  grid.values.resize(resolution * resolution);
  // Evaluate one row of the grid per forward pass.
  Shape shape = example.shape();
  shape[0] = resolution;
  const std::size_t d = example.size();
  for (std::size_t i = 0; i < resolution; ++i) {
    const double a = grid.coordinate(i);
    Tensor<double> row(shape);
    for (std::size_t j = 0; j < resolution; ++j) {
      const double b = grid.coordinate(j);
      for (std::size_t k = 0; k < d; ++k) row[j * d + k] = example[k] + a * dir1[k] + b * dir2[k];
    }
    const Tensor<double> logits = model.logits(row);
    std::vector<int> labels(resolution, label);
    const auto losses = cls_loss_per_example(logits, labels);
    for (std::size_t j = 0; j < resolution; ++j) {
      grid.values[i * resolution + j] = std::isfinite(losses[j]) ? losses[j] : kLandscapeSentinel;
    }
  }
  return grid;
}

void write_grid_csv(const std::filesystem::path& path, const LandscapeGrid& grid) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "i,j,a,b,loss\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < grid.resolution; ++i) {
    for (std::size_t j = 0; j < grid.resolution; ++j) {
      out << i << ',' << j << ',' << grid.coordinate(i) << ',' << grid.coordinate(j) << ','
          << grid.values[i * grid.resolution + j] << '\n';
    }
  }
}

}  // namespace mngac
