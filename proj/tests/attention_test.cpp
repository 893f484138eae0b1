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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hsdssa/error.hpp"

namespace hsdssa {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Tensor row_sums(const Tensor& a) {
  const std::size_t cols = a.dim(a.rank() - 1);
  Tensor out({a.size() / cols});
  for (std::size_t r = 0; r < out.size(); ++r)
    for (std::size_t j = 0; j < cols; ++j) out[r] += a[r * cols + j];
  return out;
}

TEST(ScaledDotAttentionTest, IdentityInputs) {
  const Tensor i2 = Tensor::identity(2);
  const auto r = scaled_dot_attention(i2, i2, i2);
  const double e = std::exp(1.0 / std::sqrt(2.0));
  const double hi = e / (e + 1.0), lo = 1.0 / (e + 1.0);
  EXPECT_NEAR(hi, 0.6697615493266569, 1e-15);
  EXPECT_NEAR(r.weights(0, 0), hi, 1e-15);
  EXPECT_NEAR(r.weights(0, 1), lo, 1e-15);
  EXPECT_NEAR(r.weights(1, 0), lo, 1e-15);
  EXPECT_NEAR(r.weights(1, 1), hi, 1e-15);
  EXPECT_TRUE(bitwise_equal(r.output, r.weights));
}

TEST(ScaledDotAttentionTest, SingleQueryIsConvexCombination) {
  Rng rng(1);
  const Tensor q = rng.uniform_tensor({1, 3}, -1, 1);
  const Tensor k = rng.uniform_tensor({5, 3}, -1, 1);
  const Tensor v = rng.uniform_tensor({5, 2}, -1, 1);
  const auto r = scaled_dot_attention(q, k, v);
  for (std::size_t j = 0; j < 2; ++j) {
    double lo = kInf, hi = -kInf, mix = 0.0;
    for (std::size_t t = 0; t < 5; ++t) {
      lo = std::min(lo, v(t, j));
      hi = std::max(hi, v(t, j));
      mix += r.weights(0, t) * v(t, j);
    }
    EXPECT_GE(r.output(0, j), lo);
    EXPECT_LE(r.output(0, j), hi);
    EXPECT_NEAR(r.output(0, j), mix, 1e-15);
  }
}

TEST(ScaledDotAttentionTest, IdenticalKeysGiveUniformWeights) {
  Rng rng(2);
  const Tensor row = rng.uniform_tensor({1, 4}, -1, 1);
  const Tensor k = concat0({row, row, row});
  const auto r = scaled_dot_attention(rng.uniform_tensor({2, 4}, -1, 1), k,
                                      rng.uniform_tensor({3, 2}, -1, 1));
  for (std::size_t i = 0; i < r.weights.size(); ++i) EXPECT_NEAR(r.weights[i], 1.0 / 3.0, 1e-15);
}

TEST(ScaledDotAttentionTest, ShapeMismatch) {
  EXPECT_THROW(scaled_dot_attention(Tensor({2, 3}), Tensor({2, 4}), Tensor({2, 1})),
               DimensionError);
  EXPECT_THROW(scaled_dot_attention(Tensor({2, 3}), Tensor({2, 3}), Tensor({3, 1})),
               DimensionError);
}

TEST(MultiHeadAttentionTest, SingleIdentityHeadReducesToScaledDot) {
  Rng rng(3);
  MHAConfig cfg{4, 1, {Tensor::identity(4)}, {Tensor::identity(4)}, {Tensor::identity(4)},
                Tensor::identity(4)};
  const Tensor q = rng.uniform_tensor({5, 4}, -1, 1);
  const Tensor k = rng.uniform_tensor({5, 4}, -1, 1);
  const Tensor v = rng.uniform_tensor({5, 4}, -1, 1);
  EXPECT_LT(max_abs_diff(multi_head_attention(cfg, q, k, v), scaled_dot_attention(q, k, v).output),
            1e-14);
}

TEST(MultiHeadAttentionTest, ShapesForSeveralHeadCounts) {
  Rng rng(4);
  for (std::size_t h : {1u, 2u, 4u}) {
    const MHAConfig cfg = MHAConfig::random(8, h, rng);
    const Tensor x = rng.uniform_tensor({6, 8}, -1, 1);
    EXPECT_EQ(multi_head_attention(cfg, x, x, x).shape(), (Shape{6, 8}));
  }
  EXPECT_THROW(MHAConfig::random(8, 3, rng).validate(), ConfigError);
}

TEST(MultiHeadAttentionTest, TwoHeadsComposeFromSingleHeadRuns) {
  Rng rng(5);
  const MHAConfig cfg = MHAConfig::random(8, 2, rng);
  const Tensor q = rng.uniform_tensor({3, 8}, -1, 1);
  const Tensor k = rng.uniform_tensor({4, 8}, -1, 1);
  const Tensor v = rng.uniform_tensor({4, 8}, -1, 1);
  Tensor concat({3, 8});
  for (std::size_t h = 0; h < 2; ++h) {
    const Tensor head = scaled_dot_attention(matmul(q, cfg.wq[h]), matmul(k, cfg.wk[h]),
                                             matmul(v, cfg.wv[h]))
                            .output;
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t j = 0; j < 4; ++j) concat(t, h * 4 + j) = head(t, j);
  }
  EXPECT_LT(max_abs_diff(multi_head_attention(cfg, q, k, v), matmul(concat, cfg.wo)), 1e-14);
}

TEST(TopkMaskTest, WorkedRows) {
  const Tensor a = topk_mask(Tensor({1, 3}, std::vector<double>{0.1, 0.5, 0.3}), 2);
  EXPECT_EQ(a[0], -kInf);
  EXPECT_EQ(a[1], 0.5);
  EXPECT_EQ(a[2], 0.3);
  const Tensor tie = topk_mask(Tensor({1, 3}, std::vector<double>{0.5, 0.5, 0.1}), 1);
  EXPECT_EQ(tie[0], 0.5);
  EXPECT_EQ(tie[1], 0.5);
  EXPECT_EQ(tie[2], -kInf);
}

TEST(TopkMaskTest, LargeKIsVacuous) {
  Rng rng(6);
  const Tensor p = rng.uniform_tensor({3, 4}, -1, 1);
  EXPECT_TRUE(bitwise_equal(topk_mask(p, 4), p));
  EXPECT_TRUE(bitwise_equal(topk_mask(p, 9), p));
}

TEST(TopkMaskTest, ErrorPaths) {
  EXPECT_THROW(topk_mask(Tensor({2, 2}), 0), ContractError);
  Tensor bad({1, 2});
  bad[0] = std::nan("");
  EXPECT_THROW(topk_mask(bad, 1), InputError);
}

TEST(DssaTest, WorkedShape) {
  Rng rng(7);
  const DSSAConfig cfg = DSSAConfig::random(4, 8, 1, rng);
  const auto r = dssa_forward(cfg, rng.uniform_tensor({4, 10, 8}, -1, 1));
  EXPECT_EQ(r.y.shape(), (Shape{4, 10, 8}));
  EXPECT_EQ(r.weights.shape(), (Shape{4, 10, 10}));
  EXPECT_THROW(dssa_forward(cfg, Tensor({3, 10, 8})), DimensionError);
  EXPECT_THROW(dssa_forward(cfg, Tensor({4, 10, 7})), DimensionError);
}

TEST(DssaTest, ShapePreservingAndRowsSumToOne) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t c = 1 + rng.index(8), t = 1 + rng.index(32), w = 1 + rng.index(16);
    const std::size_t kernel = rng.index(2) ? 3 : 1;
    DSSAConfig cfg = DSSAConfig::random(c, w, kernel, rng);
    if (trial % 3 == 0) cfg.topk = 1 + rng.index(t);
    const auto r = dssa_forward(cfg, rng.uniform_tensor({c, t, w}, -2, 2));
    ASSERT_EQ(r.y.shape(), (Shape{c, t, w}));
    const Tensor sums = row_sums(r.weights);
    for (std::size_t i = 0; i < sums.size(); ++i) EXPECT_NEAR(sums[i], 1.0, 1e-12);
  }
}

TEST(DssaTest, ZeroValueProjectionLeavesBeta) {
  Rng rng(9);
  DSSAConfig cfg = DSSAConfig::random(3, 4, 1, rng);
  cfg.head_beta = Tensor({3}, std::vector<double>{0.25, -1.0, 2.0});
  cfg.out_gamma = rng.uniform_tensor({3}, 0.5, 1.5);
  cfg.out_beta = rng.uniform_tensor({3}, -0.5, 0.5);
  for (auto& w : cfg.wv) w = Tensor(w.shape(), 0.0);
  const Tensor x = rng.uniform_tensor({3, 6, 4}, -1, 1);
  Tensor shifted = x;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 24; ++i) shifted[c * 24 + i] += cfg.head_beta[c];
  const Tensor expected = layer_norm(shifted, {1, 2}, cfg.out_gamma, cfg.out_beta, cfg.eps);
  EXPECT_LT(max_abs_diff(dssa_forward(cfg, x).y, expected), 1e-12);
}

TEST(DssaTest, SingleFrameByHand) {
  DSSAConfig cfg;
  cfg.channels = 1;
  cfg.width = 2;
  cfg.eps = 1e-5;
  cfg.wq = {Tensor({2, 2, 1}, std::vector<double>{0.3, -0.2, 0.1, 0.4})};
  cfg.wk = {Tensor({2, 2, 1}, std::vector<double>{-0.5, 0.2, 0.7, 0.1})};
  cfg.wv = {Tensor({2, 2, 1}, std::vector<double>{0.9, 0.3, -0.4, 0.6})};
  cfg.head_gamma = Tensor({1}, 1.5);
  cfg.head_beta = Tensor({1}, 0.2);
  cfg.out_gamma = Tensor({1}, 0.8);
  cfg.out_beta = Tensor({1}, -0.1);
  const double x0 = 0.7, x1 = -1.2;
  const auto r = dssa_forward(cfg, Tensor({1, 1, 2}, std::vector<double>{x0, x1}));
  EXPECT_EQ(r.weights[0], 1.0);

  // Two-element layer norm: (v - mean) / sqrt(var + eps) is +-d / sqrt(d^2 + eps).
  auto norm2 = [&](double a, double b, double g, double beta) {
    const double d = (a - b) / 2.0;
    const double s = std::sqrt(d * d + cfg.eps);
    return std::pair{g * d / s + beta, -g * d / s + beta};
  };
  const double v0 = 0.9 * x0 + 0.3 * x1, v1 = -0.4 * x0 + 0.6 * x1;
  const auto [h0, h1] = norm2(v0, v1, 1.5, 0.2);
  const auto [y0, y1] = norm2(x0 + h0, x1 + h1, 0.8, -0.1);
  EXPECT_NEAR(r.y[0], y0, 1e-12);
  EXPECT_NEAR(r.y[1], y1, 1e-12);
}

TEST(DssaTest, SparseRowsKeepExactlyK) {
  Rng rng(10);
  for (std::size_t k : {1u, 2u, 5u, 9u, 20u}) {
    DSSAConfig cfg = DSSAConfig::random(3, 5, 1, rng);
    cfg.topk = k;
    const std::size_t t = 9;
    const auto r = dssa_forward(cfg, rng.uniform_tensor({3, t, 5}, -1, 1));
    for (std::size_t row = 0; row < 3 * t; ++row) {
      std::size_t nonzero = 0;
      for (std::size_t j = 0; j < t; ++j) nonzero += r.weights[row * t + j] != 0.0;
      EXPECT_EQ(nonzero, std::min(k, t));
    }
  }
}

TEST(DssaTest, TopkAtLeastTMatchesDenseBitwise) {
  Rng rng(11);
  DSSAConfig cfg = DSSAConfig::random(4, 6, 3, rng);
  const Tensor x = rng.uniform_tensor({4, 7, 6}, -1, 1);
  const auto dense = dssa_forward(cfg, x);
  for (std::size_t k : {7u, 8u, 100u}) {
    cfg.topk = k;
    const auto sparse = dssa_forward(cfg, x);
    EXPECT_TRUE(bitwise_equal(sparse.y, dense.y));
    EXPECT_TRUE(bitwise_equal(sparse.weights, dense.weights));
  }
}

TEST(DssaTest, ChannelPermutationEquivarianceIsBitExact) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t c = 2 + rng.index(6);
    DSSAConfig cfg = DSSAConfig::random(c, 3 + rng.index(5), trial % 2 ? 3 : 1, rng);
    cfg.head_gamma = rng.uniform_tensor({c}, 0.5, 1.5);
    cfg.out_beta = rng.uniform_tensor({c}, -0.5, 0.5);
    if (trial % 3 == 0) cfg.topk = 2;
    const Tensor x = rng.uniform_tensor({c, 6, cfg.width}, -1, 1);
    std::vector<std::size_t> perm(c);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = c - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);

    std::vector<Tensor> slices;
    for (std::size_t p : perm) slices.push_back(x.slice0(p, p + 1));
    const auto permuted = dssa_forward(cfg.permuted(perm), concat0(slices));
    const auto base = dssa_forward(cfg, x);
    for (std::size_t i = 0; i < c; ++i) {
      EXPECT_TRUE(bitwise_equal(permuted.y.slice0(i, i + 1), base.y.slice0(perm[i], perm[i] + 1)));
      EXPECT_TRUE(bitwise_equal(permuted.weights.slice0(i, i + 1),
                                base.weights.slice0(perm[i], perm[i] + 1)));
    }
  }
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

TEST(DssaTest, SignedSqrtDampsScoreScale) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const DSSAConfig cfg = DSSAConfig::random(2, 4, 1, rng);
    const Tensor x = rng.uniform_tensor({2, 8, 4}, -1, 1);
    const double alpha = 1.0 + 9.0 * rng.uniform();
    const double base = max_abs(dssa_forward(cfg, x).scores);
    const double scaled = max_abs(dssa_forward(cfg, hsdssa::scale(x, alpha)).scores);
    EXPECT_LE(scaled, alpha * base * (1.0 + 1e-9));
    EXPECT_NEAR(scaled, alpha * base, 1e-9 * alpha * base);
  }
}

TEST(DssaTest, TimePermutationEquivarianceWithPointwiseProjections) {
  Rng rng(14);
  const DSSAConfig cfg = DSSAConfig::random(3, 5, 1, rng);
  const Tensor x = rng.uniform_tensor({3, 7, 5}, -1, 1);
  const std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
  auto permute_time = [&](const Tensor& a) {
    Tensor out(a.shape());
    for (std::size_t c = 0; c < a.dim(0); ++c)
      for (std::size_t t = 0; t < a.dim(1); ++t)
        for (std::size_t j = 0; j < a.dim(2); ++j) out(c, t, j) = a(c, perm[t], j);
    return out;
  };
  const Tensor y = dssa_forward(cfg, permute_time(x)).y;
  EXPECT_LT(max_abs_diff(y, permute_time(dssa_forward(cfg, x).y)), 1e-12);
}

TEST(DssaTest, GraphMatchesDirectForward) {
  Rng rng(15);
  DSSAConfig cfg = DSSAConfig::random(3, 4, 3, rng);
  cfg.topk = 3;
  const Tensor x = rng.uniform_tensor({3, 6, 4}, -1, 1);
  Graph g;
  const Var y = dssa_graph(g, cfg, 6);
  g.set_output(g.sum(y));
  const auto values = g.forward(dssa_bindings(cfg, x));
  EXPECT_TRUE(bitwise_equal(values[y.id], dssa_forward(cfg, x).y));
}

TEST(DssaTest, ConfigValidation) {
  Rng rng(16);
  DSSAConfig cfg = DSSAConfig::random(2, 4, 1, rng);
  cfg.topk = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.topk.reset();
  cfg.wq.pop_back();
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(DSSAConfig::random(2, 4, 3, rng).param_count(), 2u * 3u * 4u * 4u * 3u + 4u * 2u);
}

}  // namespace
}  // namespace hsdssa
