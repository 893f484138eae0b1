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

#include "hsdssa/weight_store.hpp"

#include "hsdssa/error.hpp"
#include "hsdssa/file_util.hpp"
#include "hsdssa/fmat.hpp"

namespace hsdssa {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "hsdssa-weights";

Tensor as_matrix(const Tensor& t) {
  if (t.rank() == 2) return t;
  if (t.rank() == 1) return t.reshaped({1, t.size()});
  return t.reshaped({t.dim(0), t.size() / t.dim(0)});
}

}  // namespace

fs::path resolve_manifest(const fs::path& manifest_or_dir) {
  return fs::is_directory(manifest_or_dir) ? manifest_or_dir / kManifestName : manifest_or_dir;
}

void save_weights(const fs::path& dir, const WeightBundle& bundle) {
  fs::create_directories(dir);
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : bundle.entries) {
    const std::string file = e.name + ".fmat";
    write_fmat(dir / file, as_matrix(e.value));
    entries.push_back({{"name", e.name}, {"shape", e.value.shape()}, {"file", file}});
  }
  nlohmann::json manifest = {
      {"format", kFormat}, {"version", 1}, {"meta", bundle.meta}, {"entries", entries}};
  write_file_atomic(dir / kManifestName,
                    [&](std::ostream& out) { out << manifest.dump(2) << '\n'; });
}

WeightBundle load_weights(const fs::path& manifest_or_dir) {
  const fs::path manifest_path = resolve_manifest(manifest_or_dir);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kFormat) {
    throw FormatError(manifest_path.string() + ": not a weight manifest");
  }
  WeightBundle bundle;
  bundle.meta = manifest.value("meta", nlohmann::json::object());
  const fs::path base = manifest_path.parent_path();
  for (const auto& e : manifest.value("entries", nlohmann::json::array())) {
    try {
      Shape shape = e.at("shape").get<Shape>();
      Tensor m = read_fmat(base / e.at("file").get<std::string>());
      if (m.size() != element_count(shape)) {
        throw FormatError("payload size does not match shape " + to_string(shape));
      }
      bundle.entries.push_back({e.at("name").get<std::string>(), m.reshaped(std::move(shape))});
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(manifest_path.string() + ": " + ex.what());
    } catch (const DimensionError& ex) {
      throw FormatError(manifest_path.string() + ": " + ex.what());
    }
  }
  return bundle;
}

}  // namespace hsdssa
