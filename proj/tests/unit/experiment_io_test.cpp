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

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mngac/checkpoint.hpp"
#include "mngac/config.hpp"
#include "mngac/dataset.hpp"
#include "mngac/error.hpp"
#include "mngac/pipeline.hpp"

namespace mngac {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("mngac_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

ExperimentConfig tiny_config() {
  auto c = default_config();
  c.method = "mng_ac";
  c.dataset.height = c.dataset.width = 6;
  c.dataset.classes = 3;
  c.dataset.train_size = 24;
  c.dataset.test_size = 12;
  c.model.arch = "small_cnn";
  c.model.hidden = 2;
  c.generator.hidden = 2;
  c.trainer.epochs = 2;
  c.trainer.batch_size = 8;
  c.attacks = {default_attack("pgd-linf", 36, true), default_attack("pgd-l2", 36, true)};
  c.eval_attacks = {default_attack("pgd-linf", 36), default_attack("pgd-l2", 36)};
  c.eval_batch_size = 6;
  return c;
}

TEST(Config, JsonRoundTripIsIdentity) {
  const auto c = tiny_config();
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
  const auto d = default_config();
  EXPECT_EQ(config_from_json(config_to_json(d)), d);
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(c))).dump(), config_to_json(c).dump());
}

TEST(Config, FileRoundTripAndFingerprint) {
  TempDir dir;
  const auto c = tiny_config();
  save_config(dir / "c.json", c);
  EXPECT_EQ(load_config(dir / "c.json"), c);
  auto moved = c;
  moved.output_dir = "elsewhere";
  EXPECT_EQ(config_fingerprint(moved), config_fingerprint(c));
  moved.trainer.beta = 4.0;
  EXPECT_NE(config_fingerprint(moved), config_fingerprint(c));
  EXPECT_EQ(config_fingerprint(c).size(), 16u);
}

TEST(Config, UnknownKeysAreRejectedAtEveryLevel) {
  auto j = config_to_json(tiny_config());
  j["colour"] = "blue";
  EXPECT_THROW(config_from_json(j), InvalidArgument);
  j = config_to_json(tiny_config());
  j["trainer"]["learning_rate"] = 0.1;
  EXPECT_THROW(config_from_json(j), InvalidArgument);
  j = config_to_json(tiny_config());
  j["attacks"][0]["radius"] = 0.1;
  EXPECT_THROW(config_from_json(j), InvalidArgument);
}

TEST(Config, InvalidValuesAreRejected) {
  auto c = tiny_config();
  c.trainer.batch_size = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = tiny_config();
  c.method = "adv_single";
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.attacks.resize(1);
  EXPECT_NO_THROW(c.validate());
  auto j = config_to_json(tiny_config());
  j["attacks"][0]["steps"] = 0;
  EXPECT_THROW(config_from_json(j), InvalidArgument);
  j = config_to_json(tiny_config());
  j["attacks"][0] = {{"name", "pgd-l7"}};
  EXPECT_THROW(config_from_json(j), InvalidArgument);
  j = config_to_json(tiny_config());
  j["trainer"]["beta"] = "large";
  EXPECT_THROW(config_from_json(j), InvalidArgument);
}

TEST(Config, AttackEntriesTakeRegistryDefaults) {
  auto j = config_to_json(tiny_config());
  j["attacks"] = {"pgd-l1", {{"name", "pgd-l2"}, {"steps", 3}}};
  const auto c = config_from_json(j);
  EXPECT_EQ(c.attacks[0], default_attack("pgd-l1", 36, true));
  EXPECT_EQ(c.attacks[1].steps, 3);
  EXPECT_EQ(c.attacks[1].ball, default_attack("pgd-l2", 36, true).ball);
}

TEST(Config, DottedOverrides) {
  TempDir dir;
  save_config(dir / "c.json", tiny_config());
  const std::vector<std::string> sets = {"trainer.beta=12", "method=sat", "attacks.1.steps=4", "output_dir=out/x"};
  const auto c = load_config(dir / "c.json", sets);
  EXPECT_EQ(c.trainer.beta, 12.0);
  EXPECT_EQ(c.method, "sat");
  EXPECT_EQ(c.attacks[1].steps, 4);
  EXPECT_EQ(c.output_dir, "out/x");
  const std::vector<std::string> bad_index = {"attacks.5.steps=4"};
  EXPECT_THROW(load_config(dir / "c.json", bad_index), InvalidArgument);
  const std::vector<std::string> no_eq = {"trainer.beta"};
  EXPECT_THROW(load_config(dir / "c.json", no_eq), InvalidArgument);
  EXPECT_THROW(load_config(dir / "missing.json"), IoError);
}

TEST(Dataset, SyntheticSetsAreDeterministicAndInRange) {
  for (const std::string name : {"blobs", "moons"}) {
    auto c = tiny_config().dataset;
    c.name = name;
    if (name == "moons") c.classes = 2;
    const auto a = load_dataset(c, 5), b = load_dataset(c, 5), other = load_dataset(c, 6);
    EXPECT_EQ(a.train.x, b.train.x);
    EXPECT_EQ(a.test.y, b.test.y);
    EXPECT_NE(a.train.x, other.train.x);
    EXPECT_EQ(a.train.x.shape(), (Shape{24, 1, 6, 6}));
    EXPECT_EQ(a.test.size(), 12u);
    for (double v : a.train.x.values()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    for (int y : a.train.y) EXPECT_TRUE(y >= 0 && y < static_cast<int>(c.classes));
    const BatchStream sa(a.train, 8, 1), sb(b.train, 8, 1);
    EXPECT_EQ(sa.batch(0, 0).x, sb.batch(0, 0).x);
  }
}

TEST(Dataset, EpochCoversEveryExampleOnce) {
  auto c = tiny_config().dataset;
  c.train_size = 512;
  c.classes = 10;
  const auto data = load_dataset(c, 1);
  const BatchStream stream(data.train, 128, 2);
  ASSERT_EQ(stream.batches_per_epoch(), 4u);
  for (std::size_t epoch = 0; epoch < 2; ++epoch) {
    std::multiset<std::size_t> seen;
    for (std::size_t b = 0; b < 4; ++b) {
      for (auto i : stream.indices(epoch, b)) seen.insert(i);
    }
    EXPECT_EQ(seen.size(), 512u);
    EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 512u);
  }
  EXPECT_NE(stream.indices(0, 0), stream.indices(1, 0));
  EXPECT_THROW(stream.batch(0, 4), InvalidArgument);
}

TEST(Dataset, PartialLastBatch) {
  const auto data = load_dataset(tiny_config().dataset, 1);
  const BatchStream stream(data.train, 10, 0);
  EXPECT_EQ(stream.batches_per_epoch(), 3u);
  EXPECT_EQ(stream.batch(0, 2).size(), 4u);
}

TEST(RawFormat, TensorRoundTripAndShapeCheck) {
  TempDir dir;
  Rng rng(3);
  Tensor<double> t({4, 3, 32, 32});
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform());
  write_raw_tensor(dir / "x.mngt", t);
  EXPECT_EQ(fs::file_size(dir / "x.mngt"), 4 + 4 + 4 + 4 * 8 + 4 + t.size() * 4);
  EXPECT_EQ(read_raw_tensor(dir / "x.mngt", Shape{4, 3, 32, 32}), t);
  EXPECT_THROW(read_raw_tensor(dir / "x.mngt", Shape{4, 1, 32, 32}), IoError);
  const std::vector<int> labels = {0, 9, 3, 3};
  write_raw_labels(dir / "y.mngt", labels);
  EXPECT_EQ(read_raw_labels(dir / "y.mngt"), labels);
  EXPECT_THROW(read_raw_tensor(dir / "y.mngt"), IoError);
}

TEST(RawFormat, TruncatedPayloadAndBadHeadersFail) {
  TempDir dir;
  write_raw_tensor(dir / "x.mngt", Tensor<double>({2, 3, 32, 32}, 0.5));
  auto bytes = slurp(dir / "x.mngt");
  spit(dir / "short.mngt", bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_raw_tensor(dir / "short.mngt"), IoError);
  auto magic = bytes;
  magic[0] = 'X';
  spit(dir / "magic.mngt", magic);
  EXPECT_THROW(read_raw_tensor(dir / "magic.mngt"), IoError);
  auto version = bytes;
  version[4] = 7;
  spit(dir / "version.mngt", version);
  EXPECT_THROW(read_raw_tensor(dir / "version.mngt"), VersionError);
  EXPECT_THROW(read_raw_tensor(dir / "absent.mngt"), IoError);
}

TEST(RawFormat, DatasetDirectoryLoadsAndTruncates) {
  TempDir dir;
  auto c = tiny_config().dataset;
  const auto split = load_dataset(c, 2);
  write_raw_dataset(dir.path(), split);
  DatasetConfig raw = c;
  raw.name = "raw";
  raw.path = dir.path().string();
  raw.train_size = 20;
  const auto back = load_dataset(raw, 0);
  ASSERT_EQ(back.train.size(), 20u);
  EXPECT_EQ(back.test.y, split.test.y);
  for (std::size_t i = 0; i < back.train.x.size(); ++i) {
    EXPECT_EQ(back.train.x[i], static_cast<double>(static_cast<float>(split.train.x[i])));
  }
  raw.train_size = 100;
  EXPECT_THROW(load_dataset(raw, 0), IoError);
  raw.train_size = 20;
  raw.height = 5;
  EXPECT_THROW(load_dataset(raw, 0), IoError);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  TempDir dir;
  Experiment e(tiny_config());
  e.train(3);
  e.save_checkpoint(dir / "a.mngc");
  const auto loaded = load_checkpoint(dir / "a.mngc");
  EXPECT_EQ(loaded.config, e.config());
  EXPECT_EQ(loaded.position, e.position());
  EXPECT_EQ(loaded.state.step, 3u);
  EXPECT_EQ(loaded.state.classifier.hash(), e.state().classifier.hash());
  EXPECT_EQ(loaded.state.generator.hash(), e.state().generator.hash());
  EXPECT_EQ(loaded.state.attack_rng, e.state().attack_rng);
  save_checkpoint(dir / "b.mngc", loaded.config, loaded.state, loaded.position);
  EXPECT_EQ(slurp(dir / "a.mngc"), slurp(dir / "b.mngc"));
  EXPECT_FALSE(fs::exists(dir / "a.mngc.tmp"));
}

TEST(Checkpoint, VersionAndCorruptionErrors) {
  TempDir dir;
  Experiment e(tiny_config());
  e.save_checkpoint(dir / "a.mngc");
  const auto bytes = slurp(dir / "a.mngc");

  auto version = bytes;
  version[4] = static_cast<char>(kCheckpointVersion + 1);
  spit(dir / "v.mngc", version);
  EXPECT_THROW(load_checkpoint(dir / "v.mngc"), VersionError);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x5a;
  spit(dir / "c.mngc", flipped);
  EXPECT_THROW(load_checkpoint(dir / "c.mngc"), IoError);

  spit(dir / "t.mngc", bytes.substr(0, bytes.size() - 9));
  EXPECT_THROW(load_checkpoint(dir / "t.mngc"), IoError);

  auto magic = bytes;
  magic[1] = 'Z';
  spit(dir / "m.mngc", magic);
  EXPECT_THROW(load_checkpoint(dir / "m.mngc"), IoError);
}

TEST(Checkpoint, ResumedRunMatchesUninterruptedRun) {
  TempDir dir;
  for (const std::string method : {"mng_ac", "sat", "adv_max"}) {
    auto c = tiny_config();
    c.method = method;
    Experiment straight(c);
    straight.train(5);

    Experiment first(c);
    first.train(4);
    first.save_checkpoint(dir / "k.mngc");
    auto resumed = Experiment::resume(dir / "k.mngc");
    EXPECT_EQ(resumed.position(), first.position());
    resumed.step();
    EXPECT_EQ(resumed.state().classifier.hash(), straight.state().classifier.hash()) << method;
    EXPECT_EQ(resumed.state().generator.hash(), straight.state().generator.hash()) << method;
    EXPECT_EQ(resumed.state().step, straight.state().step);
    resumed.train();
    straight.train();
    EXPECT_EQ(resumed.state().classifier.hash(), straight.state().classifier.hash()) << method;
  }
}

TEST(Experiment, ScheduleAndPositions) {
  Experiment e(tiny_config());
  EXPECT_EQ(e.batches_per_epoch(), 3u);
  EXPECT_EQ(e.total_steps(), 6u);
  EXPECT_DOUBLE_EQ(e.current_lr(), lr_at(e.config().schedule(), 0.5 / 3.0));
  std::vector<StepRecord> records;
  e.train(std::numeric_limits<std::size_t>::max(), [&](const StepRecord& r) { records.push_back(r); });
  ASSERT_EQ(records.size(), 6u);
  EXPECT_TRUE(e.finished());
  EXPECT_EQ(records[3].position, (TrainPosition{1, 0}));
  EXPECT_EQ(records.back().step, 6u);
  EXPECT_THROW(e.step(), InvalidArgument);
  std::ostringstream log;
  write_training_log_header(log);
  write_training_log_row(log, records[0]);
  EXPECT_EQ(log.str().substr(0, log.str().find('\n')),
            "step,epoch,batch,lr,loss,attack_calls,attack_index,attack_seconds,meta_seconds,update_seconds");
}

TEST(Experiment, IdenticalConfigsWriteIdenticalReports) {
  TempDir dir;
  auto c = tiny_config();
  c.trainer.epochs = 1;
  Experiment a(c), b(c);
  a.train();
  b.train();
  write_evaluation(dir / "a", a.evaluate(), "a");
  write_evaluation(dir / "b", b.evaluate(), "a");
  EXPECT_EQ(slurp(dir / "a" / "report.json"), slurp(dir / "b" / "report.json"));
  EXPECT_EQ(slurp(dir / "a" / "matrix.csv"), slurp(dir / "b" / "matrix.csv"));
  EXPECT_TRUE(fs::exists(dir / "a" / "timing.json"));
  EXPECT_TRUE(fs::exists(dir / "a" / "report.txt"));
  const auto report = report_from_json(nlohmann::json::parse(slurp(dir / "a" / "report.json")));
  EXPECT_EQ(report.config_fingerprint, config_fingerprint(c));
}

TEST(BetaSweep, ZeroBetaMatchesSat) {
  auto c = tiny_config();
  c.trainer.epochs = 1;
  const std::vector<double> betas = {0.0};
  const auto sweep = beta_sweep(c, betas);
  ASSERT_EQ(sweep.size(), 1u);
  auto s = c;
  s.method = "sat";
  Experiment sat(s);
  sat.train();
  const auto r = sat.evaluate().report;
  EXPECT_EQ(sweep[0].report.per_attack, r.per_attack);
  EXPECT_EQ(sweep[0].report.acc_union, r.acc_union);
  EXPECT_EQ(sweep[0].report.acc_clean, r.acc_clean);
}

TEST(BetaSweep, ReportsInOrderAndDuplicatesAgree) {
  auto c = tiny_config();
  c.trainer.epochs = 1;
  const std::vector<double> betas = {1.0, 4.0, 8.0, 12.0, 4.0};
  const auto sweep = beta_sweep(c, betas);
  ASSERT_EQ(sweep.size(), 5u);
  for (std::size_t i = 0; i < betas.size(); ++i) EXPECT_EQ(sweep[i].beta, betas[i]);
  EXPECT_EQ(report_json(sweep[1].report).dump(), report_json(sweep[4].report).dump());
  EXPECT_THROW(beta_sweep(c, std::vector<double>{}), InvalidArgument);
}

}  // namespace
}  // namespace mngac
