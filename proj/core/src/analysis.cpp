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

#include "hsdssa/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hsdssa/error.hpp"
#include "hsdssa/random.hpp"

namespace hsdssa {

std::uint64_t count_params(const Model& m) { return m.param_count(); }

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double median_abs_deviation(const std::vector<double>& values) {
  const double m = median(values);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - m));
  return median(std::move(dev));
}

std::vector<BenchReport> bench_round_robin(const std::vector<BenchSystem>& systems,
                                           const BenchOptions& options) {
  if (systems.empty()) throw InputError("bench: no systems given");
  if (options.repetitions < 5) throw InputError("bench: need at least 5 repetitions");
  if (options.warmup < 1) throw InputError("bench: need at least 1 warmup run");
  if (options.frames < kMinFrames) {
    throw InputError("bench: input needs at least " + std::to_string(kMinFrames) + " frames");
  }
  std::vector<Tensor> features;
  for (const auto& s : systems) {
    if (s.model == nullptr) throw InputError("bench: null model for '" + s.name + "'");
    Rng rng(options.feature_seed);
    features.push_back(rng.uniform_tensor({options.frames, s.model->config().feature_dim}, -1.0, 1.0));
  }

  for (std::size_t i = 0; i < options.warmup; ++i)
    for (std::size_t k = 0; k < systems.size(); ++k) (void)systems[k].model->embed(features[k]);
  std::vector<std::vector<double>> samples(systems.size());
  double sink = 0.0;
  for (std::size_t i = 0; i < options.repetitions; ++i) {
    for (std::size_t k = 0; k < systems.size(); ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      const Tensor e = systems[k].model->embed(features[k]);
      const auto t1 = std::chrono::steady_clock::now();
      sink += e[0];
      samples[k].push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  }
  if (!std::isfinite(sink)) throw NumericError("bench: non-finite embedding");

  std::vector<BenchReport> out;
  for (std::size_t k = 0; k < systems.size(); ++k) {
    BenchReport r;
    r.system_name = systems[k].name;
    r.param_count = count_params(*systems[k].model);
    r.timing = {median(samples[k]), median_abs_deviation(samples[k]), options.repetitions,
                options.frames, systems[k].model->config().feature_dim};
    out.push_back(std::move(r));
  }
  return out;
}

BenchReport bench_inference(const Model& m, const std::string& system_name,
                            const BenchOptions& options) {
  return bench_round_robin({{&m, system_name}}, options).front();
}

namespace {

using ordered = nlohmann::ordered_json;

ordered to_json(const BenchReport& r) {
  ordered j;
  j["system"] = r.system_name;
  j["params"] = r.param_count;
  j["median_ms"] = r.timing.median_ms;
  j["median_abs_deviation_ms"] = r.timing.median_abs_deviation_ms;
  j["repetitions"] = r.timing.repetitions;
  j["input_shape"] = {r.timing.frames, r.timing.bins};
  j["eer"] = r.eer ? ordered(*r.eer) : ordered(nullptr);
  j["min_dcf"] = r.min_dcf ? ordered(*r.min_dcf) : ordered(nullptr);
  return j;
}

// Shortest round-trip decimal form.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string report_json(const std::vector<BenchReport>& entries) {
  ordered arr = ordered::array();
  for (const auto& e : entries) arr.push_back(to_json(e));
  return arr.dump(2) + "\n";
}

std::vector<BenchReport> parse_report_json(const std::string& text) {
  std::vector<BenchReport> out;
  try {
    for (const auto& j : nlohmann::json::parse(text)) {
      BenchReport r;
      r.system_name = j.at("system").get<std::string>();
      r.param_count = j.at("params").get<std::uint64_t>();
      r.timing.median_ms = j.at("median_ms").get<double>();
      r.timing.median_abs_deviation_ms = j.at("median_abs_deviation_ms").get<double>();
      r.timing.repetitions = j.at("repetitions").get<std::size_t>();
      r.timing.frames = j.at("input_shape").at(0).get<std::size_t>();
      r.timing.bins = j.at("input_shape").at(1).get<std::size_t>();
      if (!j.at("eer").is_null()) r.eer = j["eer"].get<double>();
      if (!j.at("min_dcf").is_null()) r.min_dcf = j["min_dcf"].get<double>();
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bench report: ") + e.what());
  }
  return out;
}

std::string report_csv(const std::vector<BenchReport>& entries) {
  std::ostringstream os;
  os << "system,params,median_ms,eer,min_dcf\n";
  for (const auto& e : entries) {
    os << e.system_name << ',' << e.param_count << ',' << fmt(e.timing.median_ms) << ','
       << (e.eer ? fmt(*e.eer) : "") << ',' << (e.min_dcf ? fmt(*e.min_dcf) : "") << '\n';
  }
  return os.str();
}

}  // namespace hsdssa
