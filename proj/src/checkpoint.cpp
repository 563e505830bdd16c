// Copyright 2026 The geosynth Authors.
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

#include "geosynth/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace geosynth {
namespace {

using nlohmann::json;

json arch_to_json(const ArchitectureConfig& a) {
  return json{{"m", a.m},
              {"encoder_channels", a.encoder_channels},
              {"global_width", a.global_width},
              {"stn_widths", a.stn_widths},
              {"generator_head", a.generator_head},
              {"discriminator_head", a.discriminator_head},
              {"noise_prior", noise_prior_name(a.noise_prior)}};
}

ArchitectureConfig arch_from_json(const json& j) {
  ArchitectureConfig a;
  a.m = j.at("m").get<int>();
  a.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
  a.global_width = j.at("global_width").get<int>();
  a.stn_widths = j.at("stn_widths").get<std::vector<int>>();
  a.generator_head = j.at("generator_head").get<std::vector<int>>();
  a.discriminator_head = j.at("discriminator_head").get<std::vector<int>>();
  a.noise_prior = parse_noise_prior(j.at("noise_prior").get<std::string>());
  a.validate();
  return a;
}

json bounds_to_json(const DatasetBounds& b) {
  std::vector<double> mn(b.min.data(), b.min.data() + b.min.size());
  std::vector<double> mx(b.max.data(), b.max.data() + b.max.size());
  std::vector<double> mpu(b.meters_per_unit.data(), b.meters_per_unit.data() + b.meters_per_unit.size());
  return json{{"min", mn}, {"max", mx}, {"unit", unit_name(b.unit)}, {"meters_per_unit", mpu}};
}

DatasetBounds bounds_from_json(const json& j) {
  DatasetBounds b;
  const auto mn = j.at("min").get<std::vector<double>>();
  const auto mx = j.at("max").get<std::vector<double>>();
  const auto mpu = j.at("meters_per_unit").get<std::vector<double>>();
  b.min = Eigen::Map<const Vec>(mn.data(), static_cast<Eigen::Index>(mn.size()));
  b.max = Eigen::Map<const Vec>(mx.data(), static_cast<Eigen::Index>(mx.size()));
  b.meters_per_unit = Eigen::Map<const Vec>(mpu.data(), static_cast<Eigen::Index>(mpu.size()));
  b.unit = parse_unit(j.at("unit").get<std::string>());
  b.validate();
  return b;
}

void write_le_floats(std::ofstream& out, const double* data, Eigen::Index n) {
  std::vector<unsigned char> buf(static_cast<std::size_t>(n) * 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const float f = static_cast<float>(data[i]);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    buf[static_cast<std::size_t>(i) * 4 + 0] = static_cast<unsigned char>(u & 0xff);
    buf[static_cast<std::size_t>(i) * 4 + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
    buf[static_cast<std::size_t>(i) * 4 + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
    buf[static_cast<std::size_t>(i) * 4 + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void read_le_floats(std::ifstream& in, double* data, Eigen::Index n) {
  std::vector<unsigned char> buf(static_cast<std::size_t>(n) * 4);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw std::runtime_error("checkpoint: blob truncated");
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(buf[static_cast<std::size_t>(i) * 4 + 0]) |
                            (static_cast<std::uint32_t>(buf[static_cast<std::size_t>(i) * 4 + 1]) << 8) |
                            (static_cast<std::uint32_t>(buf[static_cast<std::size_t>(i) * 4 + 2]) << 16) |
                            (static_cast<std::uint32_t>(buf[static_cast<std::size_t>(i) * 4 + 3]) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    data[i] = static_cast<double>(f);
  }
}

std::string strip_json_suffix(const std::string& base) {
  if (base.size() > 5 && base.substr(base.size() - 5) == ".json")
    return base.substr(0, base.size() - 5);
  return base;
}

}  // namespace

void save_checkpoint(const std::string& base_path, const ModelState& state,
                     const PrivacyBudget& budget, std::uint64_t seed,
                     const std::optional<DatasetBounds>& bounds) {
  const std::string base = strip_json_suffix(base_path);
  json manifest;
  manifest["format"] = "geosynth-checkpoint-v1";
  manifest["dtype"] = "float32-le";
  manifest["arch"] = arch_to_json(state.arch);
  manifest["epsilon"] = budget.to_string();
  manifest["seed"] = seed;
  manifest["step"] = state.step;
  if (bounds) manifest["bounds"] = bounds_to_json(*bounds);

  json tensors = json::array();
  std::int64_t offset = 0;
  auto& mutable_state = const_cast<ModelState&>(state);
  visit_model(mutable_state, [&](const std::string& name, auto& t, bool trainable) {
    tensors.push_back(json{{"name", name},
                           {"rows", t.rows()},
                           {"cols", t.cols()},
                           {"offset", offset},
                           {"trainable", trainable}});
    offset += t.size();
  });
  manifest["tensors"] = tensors;
  manifest["total_values"] = offset;

  std::ofstream jout(base + ".json");
  if (!jout) throw std::runtime_error("save_checkpoint: cannot open " + base + ".json");
  jout << manifest.dump(2) << "\n";

  std::ofstream bout(base + ".bin", std::ios::binary);
  if (!bout) throw std::runtime_error("save_checkpoint: cannot open " + base + ".bin");
  visit_model(mutable_state, [&](const std::string&, auto& t, bool) {
    write_le_floats(bout, t.data(), t.size());
  });
}

Checkpoint load_checkpoint(const std::string& base_path) {
  const std::string base = strip_json_suffix(base_path);
  std::ifstream jin(base + ".json");
  if (!jin) throw std::runtime_error("load_checkpoint: cannot open " + base + ".json");
  json manifest;
  try {
    jin >> manifest;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_checkpoint: corrupt manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "geosynth-checkpoint-v1")
    throw std::runtime_error("load_checkpoint: unrecognized format");

  Checkpoint ck;
  ck.state.arch = arch_from_json(manifest.at("arch"));
  ck.budget = PrivacyBudget::parse(manifest.at("epsilon").get<std::string>());
  ck.seed = manifest.at("seed").get<std::uint64_t>();
  if (manifest.contains("bounds")) ck.bounds = bounds_from_json(manifest.at("bounds"));

  // Materialize tensors with the architecture's shapes, then overwrite from
  // the blob, verifying the manifest agrees.
  ck.state = init_model<double>(ck.state.arch, 0);
  ck.state.step = manifest.at("step").get<std::int64_t>();

  const auto& tensors = manifest.at("tensors");
  std::ifstream bin(base + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("load_checkpoint: cannot open " + base + ".bin");
  std::size_t ti = 0;
  visit_model(ck.state, [&](const std::string& name, auto& t, bool) {
    if (ti >= tensors.size()) throw std::runtime_error("load_checkpoint: manifest too short");
    const auto& entry = tensors[ti++];
    if (entry.at("name").get<std::string>() != name ||
        entry.at("rows").get<Eigen::Index>() != t.rows() ||
        entry.at("cols").get<Eigen::Index>() != t.cols())
      throw std::runtime_error("load_checkpoint: manifest does not match architecture at " + name);
    read_le_floats(bin, t.data(), t.size());
  });
  if (ti != tensors.size()) throw std::runtime_error("load_checkpoint: manifest too long");
  if (!has_finite_params(ck.state))
    throw std::runtime_error("load_checkpoint: non-finite parameters in blob");
  return ck;
}

}  // namespace geosynth
