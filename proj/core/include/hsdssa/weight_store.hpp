// Copyright 2026 The hsdssa Authors.
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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsdssa/tensor.hpp"

namespace hsdssa {

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct WeightBundle {
  nlohmann::json meta;
  std::vector<NamedTensor> entries;
};

inline constexpr const char* kManifestName = "manifest.json";

/// Writes one FMAT file per entry into `dir` (tensors of rank != 2 are stored
/// as [shape[0] x rest] and the full shape is kept in the manifest), then the
/// manifest. Payloads are float32, so a round trip rounds values.
void save_weights(const std::filesystem::path& dir, const WeightBundle& bundle);

/// Accepts the manifest path or the directory holding it.
WeightBundle load_weights(const std::filesystem::path& manifest_or_dir);

/// The manifest path for `manifest_or_dir`.
std::filesystem::path resolve_manifest(const std::filesystem::path& manifest_or_dir);

}  // namespace hsdssa
