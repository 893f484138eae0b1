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
#include <string>
#include <vector>

#include "hsdssa/autodiff.hpp"

namespace hsdssa {

/// Central differences (f(v+h) - f(v-h)) / 2h for every element of every leaf.
Bindings finite_difference_gradient(const Graph& g, const Bindings& leaves, double h = 1e-5);

struct GradientComparison {
  double max_rel_error = 0.0;
  std::size_t components_checked = 0;
  std::string worst;  // "leaf[index]" of the largest relative error
};

/// Compares reverse-mode against central differences. The relative error of a
/// component is |a - n| / max(|a|, |n|); components whose reverse-mode
/// magnitude is at most `min_magnitude` are skipped.
GradientComparison compare_gradients(const Graph& g, const Bindings& leaves, double h = 1e-5,
                                     double min_magnitude = 1e-8);

struct DssaGradcheckOptions {
  std::size_t instances = 10;
  std::uint64_t seed = 20211;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Instances whose pre-sqrt scores come within this distance of 0 are
  /// redrawn; signed_sqrt is not differentiable there.
  double min_score_magnitude = 1e-3;
};

struct DssaGradcheckReport {
  std::vector<GradientComparison> instances;
  std::vector<std::string> labels;  // shape/config of each instance
  double max_rel_error = 0.0;
  double seconds = 0.0;
  bool passed = false;
};

/// Random small DSSA instances (dense and top-k, projection kernels 1 and 3)
/// reduced to a scalar by a fixed random projection, checked against finite
/// differences.
DssaGradcheckReport run_dssa_gradcheck(const DssaGradcheckOptions& options = {});

}  // namespace hsdssa
