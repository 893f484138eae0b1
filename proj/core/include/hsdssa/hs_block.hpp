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

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "hsdssa/autodiff.hpp"
#include "hsdssa/random.hpp"
#include "hsdssa/tensor.hpp"

namespace hsdssa {

/// Hyperparameters of a Hierarchical-Split block.
///   w: channel count of the stage, t: expansion factor, s: number of splits,
///   k: square kernel size (odd).
struct HSBlockParams {
  std::size_t w = 0;
  double t = 1.0;
  std::size_t s = 2;
  std::size_t k = 3;

  /// Throws ConfigError unless s >= 2, k odd and positive, C_0 >= 2.
  void validate() const;
  /// C_0 = floor(w * t / s).
  std::size_t base_width() const;
  /// s * C_0, the width entering and leaving the block.
  std::size_t channels() const { return s * base_width(); }
};

/// C_0 = floor(w*t/s), C_i = C_0 + floor(C_{i-1} / 2).
std::vector<std::size_t> channel_widths(std::size_t w, double t, std::size_t s);

/// True when every halving C_0 .. C_{s-2} is exact, i.e. the integer
/// recurrence matches the real-valued one.
bool exact_halving(std::size_t w, double t, std::size_t s);

/// k^2 * (sum_{i=0}^{s-2} C_i^2 + C_0^2) in integer arithmetic over the
/// floored widths.
std::uint64_t hs_param_sum(std::size_t w, double t, std::size_t s, std::size_t k);

/// Same summation over the real-valued recurrence C_i = C_0 (2 - 2^-i).
double hs_param_sum_real(std::size_t w, double t, std::size_t s, std::size_t k);

/// k^2 * C_0^2 * (4s - 29/3 + 16 * 2^-s - 16/3 * 2^-2s).
double hs_param_closed(std::size_t w, double t, std::size_t s, std::size_t k);

/// Weights actually held by a constructed block: filters F_2..F_s of widths
/// C_1..C_{s-1}, i.e. k^2 * sum_{i=1}^{s-1} C_i^2. Group 1 is an identity.
std::uint64_t hs_constructed_param_count(std::size_t w, double t, std::size_t s, std::size_t k);

class HSBlock {
 public:
  /// `filters[j]` is the filter of group j + 2 with shape [C_{j+1} x C_{j+1} x k x k].
  HSBlock(HSBlockParams params, std::vector<Tensor> filters);

  static HSBlock random(const HSBlockParams& params, Rng& rng);
  static HSBlock filled(const HSBlockParams& params, double value);

  const HSBlockParams& params() const noexcept { return params_; }
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  const std::vector<Tensor>& filters() const noexcept { return filters_; }
  /// Writable access for weight loading; the shape must not change.
  Tensor& mutable_filter(std::size_t j) { return filters_.at(j); }
  std::size_t param_count() const;

  /// Channel ranges [begin, end) of y_{1,1}, ..., y_{s-1,1}, y_s in the output.
  std::vector<std::pair<std::size_t, std::size_t>> output_groups() const;

  Tensor forward(const Tensor& x) const;

  /// Differentiable version of forward with the filters baked in as constants.
  Var forward_graph(Graph& g, Var x) const;

 private:
  HSBlockParams params_;
  std::vector<std::size_t> widths_;
  std::vector<Tensor> filters_;
};

Tensor hs_forward(const HSBlock& block, const Tensor& x);

/// Filter groups as FMAT payloads plus a JSON manifest of the group shapes.
void save_hs_block(const std::filesystem::path& dir, const HSBlock& block);
HSBlock load_hs_block(const std::filesystem::path& dir);

}  // namespace hsdssa
