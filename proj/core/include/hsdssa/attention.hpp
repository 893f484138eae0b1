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

#include <optional>
#include <string>
#include <vector>

#include "hsdssa/autodiff.hpp"
#include "hsdssa/random.hpp"
#include "hsdssa/tensor.hpp"

namespace hsdssa {

struct AttentionResult {
  Tensor output;   // [T_q x d_v]
  Tensor weights;  // [T_q x T_k], rows sum to 1
};

/// softmax(Q K^T / sqrt(d)) V.
AttentionResult scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Multi-head attention. Head i projects with wq[i], wk[i], wv[i] (each
/// [d_model x d], d = d_model / heads); heads are concatenated and mapped
/// back through wo [heads*d x d_model].
struct MHAConfig {
  std::size_t d_model = 0;
  std::size_t heads = 1;
  std::vector<Tensor> wq, wk, wv;
  Tensor wo;

  std::size_t head_dim() const { return heads ? d_model / heads : 0; }
  void validate() const;
  static MHAConfig random(std::size_t d_model, std::size_t heads, Rng& rng);
};

Tensor multi_head_attention(const MHAConfig& cfg, const Tensor& q, const Tensor& k,
                            const Tensor& v);

/// Keeps, per row, every entry >= the row's k-th largest value and replaces
/// the rest with -inf. Ties at the threshold are all kept.
Tensor topk_mask(const Tensor& p, std::size_t k);

/// Depthwise separable self-attention over a [C x T x W] feature map. Each
/// channel runs its own single-head attention across time with d_k = W;
/// nothing mixes channels.
struct DSSAConfig {
  std::size_t channels = 0;
  std::size_t width = 0;
  std::size_t kernel = 1;             // temporal kernel of the Q/K/V projections
  std::optional<std::size_t> topk;    // explicit sparse attention when set
  double eps = 1e-5;

  // Per channel, [W x W x kernel] rank-1 convolution weights.
  std::vector<Tensor> wq, wk, wv;
  // Per channel affine of the per-head and final layer norms, each [C].
  Tensor head_gamma, head_beta, out_gamma, out_beta;

  void validate() const;
  std::size_t param_count() const;

  /// Projections drawn U(-b, b) with b = 1/sqrt(W*kernel); norms start at
  /// gamma = 1, beta = 0.
  static DSSAConfig random(std::size_t channels, std::size_t width, std::size_t kernel,
                           Rng& rng);

  /// Same config with channel order permuted: result channel i is channel
  /// perm[i] of this one.
  DSSAConfig permuted(const std::vector<std::size_t>& perm) const;
};

struct DSSAResult {
  Tensor y;        // [C x T x W]
  Tensor weights;  // [C x T x T], the softmaxed attention per channel
  Tensor scores;   // [C x T x T], signed_sqrt(Q K^T / sqrt(W)) before masking
};

DSSAResult dssa_forward(const DSSAConfig& cfg, const Tensor& x);

/// Leaf names used by dssa_graph for a config with `channels` channels:
/// "x", "wq.<c>", "wk.<c>", "wv.<c>", "head_gamma", "head_beta",
/// "out_gamma", "out_beta".
Bindings dssa_bindings(const DSSAConfig& cfg, const Tensor& x);

/// dssa_forward recorded on a graph with every parameter as a leaf. Returns
/// the [C x T x W] output node; the caller reduces it to a scalar.
Var dssa_graph(Graph& g, const DSSAConfig& cfg, std::size_t time_steps);

}  // namespace hsdssa
