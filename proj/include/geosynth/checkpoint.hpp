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

#pragma once

#include <optional>
#include <string>

#include "geosynth/model.hpp"
#include "geosynth/point_set.hpp"
#include "geosynth/privacy.hpp"

namespace geosynth {

// A checkpoint is a pair of files: <base>.json (architecture, epsilon, seed,
// step counter, dataset bounds, tensor manifest) and <base>.bin (all tensors
// as little-endian 32-bit floats, concatenated in manifest order). Loading a
// checkpoint and saving it again reproduces the blob byte for byte.
struct Checkpoint {
  ModelState state;
  PrivacyBudget budget;
  std::uint64_t seed = 0;
  std::optional<DatasetBounds> bounds;
};

void save_checkpoint(const std::string& base_path, const ModelState& state,
                     const PrivacyBudget& budget, std::uint64_t seed,
                     const std::optional<DatasetBounds>& bounds = std::nullopt);

Checkpoint load_checkpoint(const std::string& base_path);

}  // namespace geosynth
