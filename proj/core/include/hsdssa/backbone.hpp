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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsdssa/attention.hpp"
#include "hsdssa/hs_block.hpp"
#include "hsdssa/tensor.hpp"
#include "hsdssa/weight_store.hpp"

namespace hsdssa {

enum class Variant { kResNet34, kResNet50, kHSResNet50 };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct HSSettings {
  std::size_t s = 8;
  double t = 1.5;
  std::size_t k = 3;
};

struct DSSASettings {
  int after_stage = 3;
  std::size_t kernel = 1;
  std::optional<std::size_t> topk;
  double eps = 1e-5;
};

struct BackboneConfig {
  Variant variant = Variant::kResNet34;
  std::size_t initial_channels = 16;
  std::array<std::size_t, 4> stage_blocks{3, 4, 6, 3};
  std::optional<HSSettings> hs;      // present iff variant is hs_resnet50
  std::optional<DSSASettings> dssa;  // DSSA inserted after stage `after_stage`
  std::size_t embedding_dim = 256;
  std::size_t feature_dim = 64;

  void validate() const;

  /// Small configuration used across the test suite: 4 initial channels
  /// (HS variant: s = 4, t = 2), 16 frequency bins, 32-dim embeddings.
  static BackboneConfig toy(Variant variant);

  nlohmann::json to_json() const;
  /// Strict: unknown keys are a ConfigError.
  static BackboneConfig from_json(const nlohmann::json& j);
};

/// Minimum number of input frames accepted by embed().
inline constexpr std::size_t kMinFrames = 16;

/// Convolution followed by a per-channel affine (inference-form batch norm).
struct ConvNorm {
  Tensor weight;
  Tensor scale;
  Tensor shift;
  std::size_t stride = 1;
  std::size_t pad = 0;

  Tensor forward(const Tensor& x) const;
};

struct HSUnit {
  HSBlock block;
  Tensor scale;
  Tensor shift;
};

struct BasicBlock {
  ConvNorm first, second;
  std::optional<ConvNorm> shortcut;
};

struct Bottleneck {
  ConvNorm reduce;
  std::variant<ConvNorm, HSUnit> middle;
  ConvNorm expand;
  std::optional<ConvNorm> shortcut;
};

using ResidualBlock = std::variant<BasicBlock, Bottleneck>;

struct ForwardTrace {
  std::vector<Tensor> stage_outputs;   // after each of the four stages (post-DSSA)
  std::optional<DSSAResult> attention; // set when the model has DSSA
  Tensor embedding;                    // [embedding_dim]
};

class Model {
 public:
  /// Deterministic in (cfg, seed).
  static Model build(const BackboneConfig& cfg, std::uint64_t seed);

  const BackboneConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// features: [T x feature_dim], T >= kMinFrames.
  Tensor embed(const Tensor& features) const;
  ForwardTrace trace(const Tensor& features) const;

  /// Stage outputs from a pooled feature map onward: mean over time, flatten,
  /// project. `fmap` is [C x T' x F'] as produced by the last stage.
  Tensor pool_and_project(const Tensor& fmap) const;

  std::vector<NamedTensor> parameters() const;
  /// Replaces parameters by name; every entry must exist with the same shape.
  void load_parameters(const std::vector<NamedTensor>& entries);
  std::size_t param_count() const;

  const std::optional<DSSAConfig>& dssa() const noexcept { return dssa_; }
  DSSAConfig& mutable_dssa();
  const std::array<std::vector<ResidualBlock>, 4>& stages() const noexcept { return stages_; }

  /// [channels, frequency] extents after each stage.
  std::array<std::pair<std::size_t, std::size_t>, 4> stage_layout() const;

 private:
  template <typename F>
  void visit(F&& f);
  template <typename F>
  void visit(F&& f) const;

  BackboneConfig config_;
  std::uint64_t seed_ = 0;
  ConvNorm stem_;
  std::array<std::vector<ResidualBlock>, 4> stages_;
  std::optional<DSSAConfig> dssa_;
  Tensor embed_weight_;
  Tensor embed_bias_;
};

Model build_model(const BackboneConfig& cfg, std::uint64_t seed);
Tensor embed(const Model& m, const Tensor& features);

/// Manifest (config + seed) plus one FMAT payload per parameter.
void save_model(const std::filesystem::path& dir, const Model& model);

/// Accepts a weight manifest written by save_model, a {"config", "seed"}
/// object, or a bare BackboneConfig object. `seed_override` rebuilds from the
/// config with that seed and conflicts with stored weights (ConfigError).
Model load_model(const std::filesystem::path& path,
                 std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace hsdssa
