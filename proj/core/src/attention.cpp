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

#include "hsdssa/attention.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "hsdssa/error.hpp"

namespace hsdssa {

AttentionResult scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw DimensionError("attention: Q, K, V must be rank 2");
  }
  if (q.dim(1) != k.dim(1)) {
    throw DimensionError("attention: Q " + to_string(q.shape()) + " and K " +
                         to_string(k.shape()) + " differ in d");
  }
  if (k.dim(0) != v.dim(0)) {
    throw DimensionError("attention: K " + to_string(k.shape()) + " and V " +
                         to_string(v.shape()) + " differ in length");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor weights = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d));
  Tensor output = matmul(weights, v);
  return {std::move(output), std::move(weights)};
}

void MHAConfig::validate() const {
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw ConfigError("MHA: d_model (" + std::to_string(d_model) +
                      ") must be a positive multiple of h (" + std::to_string(heads) + ")");
  }
  const Shape proj{d_model, head_dim()};
  if (wq.size() != heads || wk.size() != heads || wv.size() != heads) {
    throw ConfigError("MHA: need one Q/K/V projection per head");
  }
  for (std::size_t i = 0; i < heads; ++i) {
    if (wq[i].shape() != proj || wk[i].shape() != proj || wv[i].shape() != proj) {
      throw DimensionError("MHA: head " + std::to_string(i) + " projections must be " +
                           to_string(proj));
    }
  }
  if (wo.shape() != Shape{heads * head_dim(), d_model}) {
    throw DimensionError("MHA: W^O must be " + to_string({heads * head_dim(), d_model}) +
                         ", got " + to_string(wo.shape()));
  }
}

MHAConfig MHAConfig::random(std::size_t d_model, std::size_t heads, Rng& rng) {
  MHAConfig cfg;
  cfg.d_model = d_model;
  cfg.heads = heads;
  if (heads == 0 || d_model % heads != 0) cfg.validate();
  const std::size_t d = d_model / heads;
  for (std::size_t i = 0; i < heads; ++i) {
    cfg.wq.push_back(rng.fan_in_uniform({d_model, d}, d_model));
    cfg.wk.push_back(rng.fan_in_uniform({d_model, d}, d_model));
    cfg.wv.push_back(rng.fan_in_uniform({d_model, d}, d_model));
  }
  cfg.wo = rng.fan_in_uniform({heads * d, d_model}, heads * d);
  return cfg;
}

Tensor multi_head_attention(const MHAConfig& cfg, const Tensor& q, const Tensor& k,
                            const Tensor& v) {
  cfg.validate();
  for (const Tensor* t : {&q, &k, &v}) {
    if (t->rank() != 2 || t->dim(1) != cfg.d_model) {
      throw DimensionError("MHA: inputs must be [T x " + std::to_string(cfg.d_model) +
                           "], got " + to_string(t->shape()));
    }
  }
  if (k.dim(0) != v.dim(0)) throw DimensionError("MHA: K and V lengths differ");
  const std::size_t d = cfg.head_dim();
  Tensor concat(Shape{q.dim(0), cfg.heads * d});
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const Tensor head =
        scaled_dot_attention(matmul(q, cfg.wq[h]), matmul(k, cfg.wk[h]), matmul(v, cfg.wv[h]))
            .output;
    for (std::size_t r = 0; r < head.dim(0); ++r)
      for (std::size_t c = 0; c < d; ++c) concat(r, h * d + c) = head(r, c);
  }
  return matmul(concat, cfg.wo);
}

Tensor topk_mask(const Tensor& p, std::size_t k) {
  if (k < 1) throw ContractError("topk_mask: k must be >= 1");
  if (p.rank() != 2) throw DimensionError("topk_mask: expected rank 2, got " + to_string(p.shape()));
  if (!all_finite(p)) throw InputError("topk_mask: scores must be finite");
  const std::size_t cols = p.dim(1);
  if (k >= cols) return p;
  Tensor out = p;
  std::vector<double> row(cols);
  for (std::size_t i = 0; i < p.dim(0); ++i) {
    for (std::size_t j = 0; j < cols; ++j) row[j] = p(i, j);
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k - 1), row.end(),
                     std::greater<>());
    const double threshold = row[k - 1];
    for (std::size_t j = 0; j < cols; ++j) {
      if (p(i, j) < threshold) out(i, j) = -std::numeric_limits<double>::infinity();
    }
  }
  return out;
}

void DSSAConfig::validate() const {
  if (channels == 0 || width == 0) throw ConfigError("DSSA: channels and width must be positive");
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("DSSA: projection kernel must be odd");
  if (topk && *topk < 1) throw ConfigError("DSSA: top-k must be >= 1");
  if (!(eps > 0.0)) throw ConfigError("DSSA: eps must be positive");
  const Shape proj{width, width, kernel};
  for (const auto* set : {&wq, &wk, &wv}) {
    if (set->size() != channels) throw ConfigError("DSSA: need one projection per channel");
    for (const auto& w : *set) {
      if (w.shape() != proj) {
        throw DimensionError("DSSA: projection must be " + to_string(proj) + ", got " +
                             to_string(w.shape()));
      }
    }
  }
  for (const auto* a : {&head_gamma, &head_beta, &out_gamma, &out_beta}) {
    if (a->size() != channels) throw DimensionError("DSSA: affine parameters must have C entries");
  }
}

std::size_t DSSAConfig::param_count() const {
  return 3 * channels * width * width * kernel + 4 * channels;
}

DSSAConfig DSSAConfig::random(std::size_t channels, std::size_t width, std::size_t kernel,
                              Rng& rng) {
  DSSAConfig cfg;
  cfg.channels = channels;
  cfg.width = width;
  cfg.kernel = kernel;
  for (std::size_t c = 0; c < channels; ++c) {
    cfg.wq.push_back(rng.fan_in_uniform({width, width, kernel}, width * kernel));
    cfg.wk.push_back(rng.fan_in_uniform({width, width, kernel}, width * kernel));
    cfg.wv.push_back(rng.fan_in_uniform({width, width, kernel}, width * kernel));
  }
  cfg.head_gamma = Tensor({channels}, 1.0);
  cfg.head_beta = Tensor({channels}, 0.0);
  cfg.out_gamma = Tensor({channels}, 1.0);
  cfg.out_beta = Tensor({channels}, 0.0);
  cfg.validate();
  return cfg;
}

DSSAConfig DSSAConfig::permuted(const std::vector<std::size_t>& perm) const {
  if (perm.size() != channels) throw ContractError("DSSA: permutation has wrong length");
  DSSAConfig out = *this;
  for (std::size_t i = 0; i < channels; ++i) {
    const std::size_t src = perm.at(i);
    out.wq[i] = wq.at(src);
    out.wk[i] = wk.at(src);
    out.wv[i] = wv.at(src);
    out.head_gamma[i] = head_gamma[src];
    out.head_beta[i] = head_beta[src];
    out.out_gamma[i] = out_gamma[src];
    out.out_beta[i] = out_beta[src];
  }
  return out;
}

namespace {

// Per-frame projection of a [T x W] channel slice: a rank-1 convolution along
// time with the W features as convolution channels.
Tensor project(const Tensor& xc, const Tensor& w, std::size_t kernel) {
  return transpose(conv(transpose(xc), w, {.stride = 1, .padding = {kernel / 2}}));
}

}  // namespace

DSSAResult dssa_forward(const DSSAConfig& cfg, const Tensor& x) {
  cfg.validate();
  if (x.rank() != 3 || x.dim(0) != cfg.channels || x.dim(2) != cfg.width) {
    throw DimensionError("DSSA: expected input [" + std::to_string(cfg.channels) + " x T x " +
                         std::to_string(cfg.width) + "], got " + to_string(x.shape()));
  }
  const std::size_t C = cfg.channels, T = x.dim(1), W = cfg.width;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(W));

  std::vector<Tensor> heads, weights, scores;
  heads.reserve(C);
  for (std::size_t c = 0; c < C; ++c) {
    const Tensor xc = x.slice0(c, c + 1).reshaped({T, W});
    const Tensor q = project(xc, cfg.wq[c], cfg.kernel);
    const Tensor k = project(xc, cfg.wk[c], cfg.kernel);
    const Tensor v = project(xc, cfg.wv[c], cfg.kernel);
    Tensor p = signed_sqrt(scale(matmul(q, transpose(k)), inv_sqrt_dk));
    Tensor a = softmax_rows(cfg.topk ? topk_mask(p, *cfg.topk) : p);
    Tensor head = layer_norm(matmul(a, v), {0, 1}, cfg.head_gamma.slice0(c, c + 1),
                             cfg.head_beta.slice0(c, c + 1), cfg.eps);
    heads.push_back(head.reshaped({1, T, W}));
    weights.push_back(a.reshaped({1, T, T}));
    scores.push_back(p.reshaped({1, T, T}));
  }
  Tensor y = layer_norm(add(x, concat0(heads)), {1, 2}, cfg.out_gamma, cfg.out_beta, cfg.eps);
  return {std::move(y), concat0(weights), concat0(scores)};
}

Bindings dssa_bindings(const DSSAConfig& cfg, const Tensor& x) {
  Bindings b;
  b["x"] = x;
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    b["wq." + std::to_string(c)] = cfg.wq[c];
    b["wk." + std::to_string(c)] = cfg.wk[c];
    b["wv." + std::to_string(c)] = cfg.wv[c];
  }
  b["head_gamma"] = cfg.head_gamma;
  b["head_beta"] = cfg.head_beta;
  b["out_gamma"] = cfg.out_gamma;
  b["out_beta"] = cfg.out_beta;
  return b;
}

Var dssa_graph(Graph& g, const DSSAConfig& cfg, std::size_t time_steps) {
  const std::size_t C = cfg.channels, T = time_steps, W = cfg.width;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(W));
  const ConvParams same{.stride = 1, .padding = {cfg.kernel / 2}};
  const Var x = g.leaf("x");
  const Var head_gamma = g.leaf("head_gamma"), head_beta = g.leaf("head_beta");
  auto project_var = [&](Var xc, Var w) { return g.transpose(g.conv(g.transpose(xc), w, same)); };

  std::vector<Var> heads;
  for (std::size_t c = 0; c < C; ++c) {
    const std::string id = std::to_string(c);
    const Var xc = g.reshape(g.slice0(x, c, c + 1), {T, W});
    const Var q = project_var(xc, g.leaf("wq." + id));
    const Var k = project_var(xc, g.leaf("wk." + id));
    const Var v = project_var(xc, g.leaf("wv." + id));
    Var p = g.signed_sqrt(g.scale(g.matmul(q, g.transpose(k)), inv_sqrt_dk));
    if (cfg.topk) p = g.topk_mask(p, *cfg.topk);
    const Var a = g.softmax_rows(p);
    const Var head = g.layer_norm(g.matmul(a, v), {0, 1}, g.slice0(head_gamma, c, c + 1),
                                  g.slice0(head_beta, c, c + 1), cfg.eps);
    heads.push_back(g.reshape(head, {1, T, W}));
  }
  return g.layer_norm(g.add(x, g.concat0(heads)), {1, 2}, g.leaf("out_gamma"),
                      g.leaf("out_beta"), cfg.eps);
}

}  // namespace hsdssa
