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

#include "mngac/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mngac/error.hpp"
#include "mngac/rng.hpp"

namespace mngac {

namespace {

constexpr char kMagic[4] = {'M', 'N', 'G', 'C'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void pod(const T& v) {
    out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint64_t>(s.size()));
    out_ += s;
  }
  void params(const ParamSet<double>& ps) {
    pod(static_cast<std::uint32_t>(ps.size()));
    for (const auto& t : ps) {
      pod(static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) pod(static_cast<std::uint64_t>(d));
      out_.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
    }
  }
  const std::string& bytes() const { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : in_(bytes) {}
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  ParamSet<double> params() {
    const auto count = pod<std::uint32_t>();
    ParamSet<double> ps;
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto rank = pod<std::uint32_t>();
      if (rank > 8) throw IoError("checkpoint: corrupt tensor rank");
      Shape shape(rank);
      for (auto& d : shape) d = static_cast<std::size_t>(pod<std::uint64_t>());
      Tensor<double> t(shape);
      need(t.size() * sizeof(double));
      std::memcpy(t.data(), in_.data() + pos_, t.size() * sizeof(double));
      pos_ += t.size() * sizeof(double);
      ps.push_back(std::move(t));
    }
    return ps;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw IoError("checkpoint: payload ends early");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void assign_params(ParamSet<double>& dst, ParamSet<double> src, const char* what) {
  if (src.size() != dst.size()) throw IoError(std::string("checkpoint: ") + what + " has the wrong number of arrays");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (src[i].shape() != dst[i].shape()) {
      throw IoError(std::string("checkpoint: ") + what + " array " + std::to_string(i) + " has shape " +
                    shape_string(src[i].shape()) + ", model expects " + shape_string(dst[i].shape()));
    }
  }
  dst = std::move(src);
}

}  // namespace

TrainState initial_state(const ExperimentConfig& config) {
  const auto& d = config.dataset;
  Classifier classifier = make_classifier(parse_arch(config.model.arch), d.channels, d.height, d.width, d.classes,
                                          config.seeds.init, config.model.hidden);
  MetaNoiseGenerator generator(GeneratorSpec{d.channels, d.height, d.width, config.generator.hidden,
                                             config.generator.slope},
                               derive_seed(config.seeds.init, 1));
  return TrainState(std::move(classifier), std::move(generator), config.seeds.attack, config.seeds.noise);
}

void save_checkpoint(const std::filesystem::path& path, const ExperimentConfig& config, const TrainState& state,
                     const TrainPosition& position) {
  Writer w;
  w.str(config_to_json(config).dump());
  w.str(config_fingerprint(config));
  w.pod(static_cast<std::uint64_t>(position.epoch));
  w.pod(static_cast<std::uint64_t>(position.batch));
  w.pod(state.step);
  w.params(state.classifier.params());
  w.params(state.generator.params());
  w.params(state.theta_momentum);
  w.params(state.phi_momentum);
  w.str(state.attack_rng.state());
  w.str(state.noise_rng.state());

  const std::string& payload = w.bytes();
  Writer header;
  header.pod(kMagic);
  header.pod(kCheckpointVersion);
  header.pod(static_cast<std::uint64_t>(payload.size()));
  header.pod(fnv1a(payload));

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(header.bytes().data(), static_cast<std::streamsize>(header.bytes().size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string bytes = buffer.str();

  Reader header(bytes);
  constexpr std::size_t header_size = 4 + 4 + 8 + 8;
  if (bytes.size() < header_size || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError(path.string() + ": not a checkpoint");
  }
  header.pod<std::array<char, 4>>();
  const auto version = header.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError(path.string() + ": checkpoint version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }
  const auto length = header.pod<std::uint64_t>();
  const auto checksum = header.pod<std::uint64_t>();
  const std::string_view payload = std::string_view(bytes).substr(header_size);
  if (payload.size() != length) {
    throw IoError(path.string() + ": payload is " + std::to_string(payload.size()) + " bytes, header says " +
                  std::to_string(length));
  }
  if (fnv1a(payload) != checksum) throw IoError(path.string() + ": checksum mismatch");

  Reader r(payload);
  ExperimentConfig config = config_from_json(nlohmann::json::parse(r.str()));
  std::string fingerprint = r.str();
  if (fingerprint != config_fingerprint(config)) throw IoError(path.string() + ": config fingerprint mismatch");
  TrainPosition position;
  position.epoch = static_cast<std::size_t>(r.pod<std::uint64_t>());
  position.batch = static_cast<std::size_t>(r.pod<std::uint64_t>());
  TrainState state = initial_state(config);
  state.step = r.pod<std::uint64_t>();
  assign_params(state.classifier.params(), r.params(), "theta");
  assign_params(state.generator.params(), r.params(), "phi");
  assign_params(state.theta_momentum, r.params(), "theta momentum");
  assign_params(state.phi_momentum, r.params(), "phi momentum");
  state.attack_rng.set_state(r.str());
  state.noise_rng.set_state(r.str());
  if (!r.done()) throw IoError(path.string() + ": trailing bytes in payload");
  return {std::move(config), std::move(fingerprint), position, std::move(state)};
}

}  // namespace mngac
