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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hsdssa/backbone.hpp"

namespace hsdssa {

struct Timing {
  double median_ms = 0.0;
  double median_abs_deviation_ms = 0.0;
  std::size_t repetitions = 0;
  std::size_t frames = 0;  // input_shape = (frames, bins)
  std::size_t bins = 0;
  bool operator==(const Timing&) const = default;
};

struct BenchReport {
  std::string system_name;
  std::uint64_t param_count = 0;
  Timing timing;
  std::optional<double> eer;
  std::optional<double> min_dcf;

  bool operator==(const BenchReport&) const = default;
};

/// Element count over every weight tensor, norm affines included.
std::uint64_t count_params(const Model& m);

struct BenchOptions {
  std::size_t frames = 200;
  std::size_t repetitions = 10;
  std::size_t warmup = 1;
  std::uint64_t feature_seed = 7;
};

/// Times `embed` on fixed random features. Warmup runs are discarded; only
/// embed is inside the timed region.
BenchReport bench_inference(const Model& m, const std::string& system_name,
                            const BenchOptions& options);

struct BenchSystem {
  const Model* model = nullptr;
  std::string name;
};

/// Times several systems with their runs interleaved (one embed per system
/// per round), so slow drift of the machine hits every system alike.
std::vector<BenchReport> bench_round_robin(const std::vector<BenchSystem>& systems,
                                           const BenchOptions& options);

double median(std::vector<double> values);
double median_abs_deviation(const std::vector<double>& values);

/// JSON array, one object per entry, fixed field order.
std::string report_json(const std::vector<BenchReport>& entries);
std::vector<BenchReport> parse_report_json(const std::string& text);

/// "system,params,median_ms,eer,min_dcf" plus one row per entry; missing
/// metrics are empty cells.
std::string report_csv(const std::vector<BenchReport>& entries);

}  // namespace hsdssa
