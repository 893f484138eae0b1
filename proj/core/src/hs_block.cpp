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

#include "hsdssa/hs_block.hpp"

#include <cmath>

#include "hsdssa/error.hpp"
#include "hsdssa/weight_store.hpp"

namespace hsdssa {

namespace {

std::size_t floor_base_width(std::size_t w, double t, std::size_t s) {
  if (s == 0 || !(t > 0.0)) return 0;
  // Guard against w*t/s landing a hair under an integer.
  return static_cast<std::size_t>(std::floor(static_cast<double>(w) * t / static_cast<double>(s) + 1e-9));
}

void check_kernel(std::size_t k) {
  if (k == 0 || k % 2 == 0) {
    throw ConfigError("HS-block: kernel size must be a positive odd integer, got " + std::to_string(k));
  }
}

}  // namespace

void HSBlockParams::validate() const {
  if (s < 2) throw ConfigError("HS-block: s must be >= 2, got " + std::to_string(s));
  if (!(t > 0.0)) throw ConfigError("HS-block: t must be positive");
  check_kernel(k);
  if (base_width() < 2) {
    throw ConfigError("HS-block: C_0 = floor(w*t/s) = " + std::to_string(base_width()) +
                      " < 2 (w=" + std::to_string(w) + ", s=" + std::to_string(s) + ")");
  }
}

std::size_t HSBlockParams::base_width() const { return floor_base_width(w, t, s); }

std::vector<std::size_t> channel_widths(std::size_t w, double t, std::size_t s) {
  HSBlockParams{w, t, s, 1}.validate();
  std::vector<std::size_t> widths{floor_base_width(w, t, s)};
  for (std::size_t i = 1; i < s; ++i) widths.push_back(widths[0] + widths[i - 1] / 2);
  return widths;
}

bool exact_halving(std::size_t w, double t, std::size_t s) {
  const auto c = channel_widths(w, t, s);
  for (std::size_t i = 0; i + 2 < s; ++i) {
    if (c[i] % 2 != 0) return false;
  }
  return true;
}

std::uint64_t hs_param_sum(std::size_t w, double t, std::size_t s, std::size_t k) {
  check_kernel(k);
  const auto c = channel_widths(w, t, s);
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i + 1 < s; ++i) acc += static_cast<std::uint64_t>(c[i]) * c[i];
  acc += static_cast<std::uint64_t>(c[0]) * c[0];
  return static_cast<std::uint64_t>(k) * k * acc;
}

double hs_param_sum_real(std::size_t w, double t, std::size_t s, std::size_t k) {
  check_kernel(k);
  const double c0 = static_cast<double>(channel_widths(w, t, s)[0]);
  double acc = c0 * c0;
  double ci = c0;
  for (std::size_t i = 0; i + 1 < s; ++i) {
    acc += ci * ci;
    ci = c0 + ci / 2.0;
  }
  return static_cast<double>(k * k) * acc;
}

double hs_param_closed(std::size_t w, double t, std::size_t s, std::size_t k) {
  check_kernel(k);
  const double c0 = static_cast<double>(channel_widths(w, t, s)[0]);
  const double sd = static_cast<double>(s);
  const double bracket = 4.0 * sd - 29.0 / 3.0 + 16.0 * std::exp2(-sd) -
                         16.0 / 3.0 * std::exp2(-2.0 * sd);
  return static_cast<double>(k * k) * c0 * c0 * bracket;
}

std::uint64_t hs_constructed_param_count(std::size_t w, double t, std::size_t s, std::size_t k) {
  check_kernel(k);
  const auto c = channel_widths(w, t, s);
  std::uint64_t acc = 0;
  for (std::size_t i = 1; i < s; ++i) acc += static_cast<std::uint64_t>(c[i]) * c[i];
  return static_cast<std::uint64_t>(k) * k * acc;
}

HSBlock::HSBlock(HSBlockParams params, std::vector<Tensor> filters)
    : params_(params), filters_(std::move(filters)) {
  params_.validate();
  widths_ = channel_widths(params_.w, params_.t, params_.s);
  if (filters_.size() != params_.s - 1) {
    throw ConfigError("HS-block: expected " + std::to_string(params_.s - 1) +
                      " filter groups, got " + std::to_string(filters_.size()));
  }
  for (std::size_t j = 0; j < filters_.size(); ++j) {
    const std::size_t c = widths_[j + 1];
    const Shape expected{c, c, params_.k, params_.k};
    if (filters_[j].shape() != expected) {
      throw DimensionError("HS-block: filter of group " + std::to_string(j + 2) + " has shape " +
                           to_string(filters_[j].shape()) + ", expected " + to_string(expected));
    }
  }
}

HSBlock HSBlock::random(const HSBlockParams& params, Rng& rng) {
  params.validate();
  const auto widths = channel_widths(params.w, params.t, params.s);
  std::vector<Tensor> filters;
  for (std::size_t i = 1; i < params.s; ++i) {
    const std::size_t c = widths[i];
    filters.push_back(rng.fan_in_uniform({c, c, params.k, params.k}, c * params.k * params.k));
  }
  return HSBlock(params, std::move(filters));
}

HSBlock HSBlock::filled(const HSBlockParams& params, double value) {
  params.validate();
  const auto widths = channel_widths(params.w, params.t, params.s);
  std::vector<Tensor> filters;
  for (std::size_t i = 1; i < params.s; ++i) {
    filters.emplace_back(Shape{widths[i], widths[i], params.k, params.k}, value);
  }
  return HSBlock(params, std::move(filters));
}

std::size_t HSBlock::param_count() const {
  std::size_t n = 0;
  for (const auto& f : filters_) n += f.size();
  return n;
}

std::vector<std::pair<std::size_t, std::size_t>> HSBlock::output_groups() const {
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params_.s; ++i) {
    const std::size_t width = widths_[i];
    const std::size_t kept = i + 1 < params_.s ? width - width / 2 : width;
    groups.emplace_back(offset, offset + kept);
    offset += kept;
  }
  return groups;
}

Tensor HSBlock::forward(const Tensor& x) const {
  const std::size_t c0 = widths_[0];
  if (x.rank() != 3 || x.dim(0) != params_.channels()) {
    throw DimensionError("HS-block: expected input [" + std::to_string(params_.channels()) +
                         " x H x W], got " + to_string(x.shape()));
  }
  const ConvParams same{.stride = 1, .padding = {params_.k / 2}};
  std::vector<Tensor> kept;
  Tensor carry;
  for (std::size_t i = 0; i < params_.s; ++i) {
    Tensor xi = x.slice0(i * c0, (i + 1) * c0);
    Tensor yi = i == 0 ? std::move(xi) : conv(concat0({xi, carry}), filters_[i - 1], same);
    if (i + 1 == params_.s) {
      kept.push_back(std::move(yi));
    } else {
      const std::size_t width = yi.dim(0);
      const std::size_t split = width - width / 2;  // y_{i,1} takes the ceil half
      kept.push_back(yi.slice0(0, split));
      carry = yi.slice0(split, width);
    }
  }
  return concat0(kept);
}

Var HSBlock::forward_graph(Graph& g, Var x) const {
  const std::size_t c0 = widths_[0];
  const ConvParams same{.stride = 1, .padding = {params_.k / 2}};
  std::vector<Var> kept;
  Var carry{};
  for (std::size_t i = 0; i < params_.s; ++i) {
    Var xi = g.slice0(x, i * c0, (i + 1) * c0);
    Var yi = i == 0 ? xi : g.conv(g.concat0({xi, carry}), g.constant(filters_[i - 1]), same);
    if (i + 1 == params_.s) {
      kept.push_back(yi);
    } else {
      const std::size_t width = widths_[i];
      const std::size_t split = width - width / 2;
      kept.push_back(g.slice0(yi, 0, split));
      carry = g.slice0(yi, split, width);
    }
  }
  return g.concat0(kept);
}

Tensor hs_forward(const HSBlock& block, const Tensor& x) { return block.forward(x); }

void save_hs_block(const std::filesystem::path& dir, const HSBlock& block) {
  WeightBundle bundle;
  const auto& p = block.params();
  nlohmann::json groups = nlohmann::json::array();
  for (std::size_t j = 0; j < block.filters().size(); ++j) {
    const std::string name = "group" + std::to_string(j + 2);
    groups.push_back({{"group", j + 2}, {"name", name}, {"shape", block.filters()[j].shape()}});
    bundle.entries.push_back({name, block.filters()[j]});
  }
  bundle.meta = {{"kind", "hs_block"}, {"w", p.w}, {"t", p.t}, {"s", p.s}, {"k", p.k},
                 {"groups", groups}};
  save_weights(dir, bundle);
}

HSBlock load_hs_block(const std::filesystem::path& dir) {
  WeightBundle bundle = load_weights(dir);
  const auto& m = bundle.meta;
  if (m.value("kind", "") != "hs_block") throw FormatError("not an HS-block manifest: " + dir.string());
  HSBlockParams p{m.at("w").get<std::size_t>(), m.at("t").get<double>(),
                  m.at("s").get<std::size_t>(), m.at("k").get<std::size_t>()};
  std::vector<Tensor> filters;
  for (std::size_t j = 2; j <= p.s; ++j) {
    const std::string name = "group" + std::to_string(j);
    auto it = std::find_if(bundle.entries.begin(), bundle.entries.end(),
                           [&](const NamedTensor& e) { return e.name == name; });
    if (it == bundle.entries.end()) throw FormatError("HS-block manifest lacks " + name);
    filters.push_back(it->value);
  }
  return HSBlock(p, std::move(filters));
}

}  // namespace hsdssa
