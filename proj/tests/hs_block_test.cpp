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

#include <gtest/gtest.h>

#include <cmath>

#include "hsdssa/error.hpp"

namespace hsdssa {
namespace {

using Widths = std::vector<std::size_t>;

TEST(ChannelWidthsTest, WorkedSchedules) {
  EXPECT_EQ(channel_widths(64, 1.5, 8), (Widths{12, 18, 21, 22, 23, 23, 23, 23}));
  EXPECT_EQ(channel_widths(16, 4.0, 4), (Widths{16, 24, 28, 30}));
  for (std::size_t c0 : {2u, 4u, 10u, 32u}) {
    EXPECT_EQ(channel_widths(c0, 2.0, 2), (Widths{c0, 3 * c0 / 2}));
  }
}

TEST(ChannelWidthsTest, NonDecreasingAndBounded) {
  for (std::size_t w = 4; w <= 64; w += 3) {
    for (std::size_t s = 2; s <= 8; ++s) {
      for (double t : {1.0, 1.5, 2.0, 4.0}) {
        if (static_cast<std::size_t>(std::floor(w * t / s + 1e-9)) < 2) continue;
        const auto c = channel_widths(w, t, s);
        for (std::size_t i = 1; i < c.size(); ++i) {
          EXPECT_GE(c[i], c[i - 1]);
          EXPECT_LE(c[i], 2 * c[0]);
        }
      }
    }
  }
}

TEST(ChannelWidthsTest, RejectsDegenerateConfigs) {
  EXPECT_THROW(channel_widths(4, 1.5, 8), ConfigError);  // C_0 = 0
  EXPECT_THROW(channel_widths(3, 1.0, 2), ConfigError);  // C_0 = 1
  EXPECT_THROW(channel_widths(16, 1.0, 1), ConfigError);
}

TEST(HsParamTest, WorkedValuesBothForms) {
  EXPECT_EQ(hs_param_sum(16, 4.0, 4, 3), 16848u);
  EXPECT_DOUBLE_EQ(hs_param_closed(16, 4.0, 4, 3), 16848.0);
  EXPECT_EQ(hs_param_sum(8, 2.0, 2, 1), 128u);
  EXPECT_DOUBLE_EQ(hs_param_closed(8, 2.0, 2, 1), 128.0);
  EXPECT_THROW(hs_param_sum(16, 4.0, 4, 0), ConfigError);
  EXPECT_THROW(hs_param_closed(16, 4.0, 4, 2), ConfigError);
}

TEST(HsParamTest, SummationEqualsClosedFormOnExactHalving) {
  std::size_t checked = 0;
  for (std::size_t s = 2; s <= 10; ++s) {
    for (std::size_t c0 : {4u, 8u, 16u, 32u}) {
      for (std::size_t k : {1u, 3u}) {
        // w * t / s = c0 with t = 1 means w = c0 * s.
        if (!exact_halving(c0 * s, 1.0, s)) continue;
        const double closed = hs_param_closed(c0 * s, 1.0, s, k);
        EXPECT_EQ(hs_param_sum(c0 * s, 1.0, s, k), static_cast<std::uint64_t>(std::llround(closed)))
            << "s=" << s << " C0=" << c0 << " k=" << k;
        EXPECT_NEAR(hs_param_sum_real(c0 * s, 1.0, s, k), closed, 1e-9 * closed);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 20u);
}

TEST(HsParamTest, RealRecurrenceMatchesClosedFormAlways) {
  // s = 8, t = 1.5 never halves exactly; the closed form sums the
  // real-valued recurrence.
  for (std::size_t w : {16u, 32u, 64u, 128u, 256u}) {
    const double closed = hs_param_closed(w, 1.5, 8, 3);
    EXPECT_NEAR(hs_param_sum_real(w, 1.5, 8, 3), closed, 1e-9 * closed);
    EXPECT_FALSE(exact_halving(w, 1.5, 8));
  }
}

TEST(HsParamTest, ConstructedCountMatchesBlock) {
  Rng rng(3);
  for (const HSBlockParams p : {HSBlockParams{64, 1.5, 8, 3}, HSBlockParams{16, 4.0, 4, 3},
                                HSBlockParams{12, 1.0, 3, 1}}) {
    EXPECT_EQ(HSBlock::random(p, rng).param_count(), hs_constructed_param_count(p.w, p.t, p.s, p.k));
  }
  // Group 1 is an identity, so the printed "+C_0^2" term has no weights behind it.
  EXPECT_EQ(hs_constructed_param_count(16, 4.0, 4, 3), 9u * (24 * 24 + 28 * 28 + 30 * 30));
}

TEST(HsForwardTest, ZeroWeightsPassOnlyFirstHalfOfGroupOne) {
  Rng rng(5);
  const HSBlockParams p{8, 2.0, 4, 3};  // C_0 = 4
  const HSBlock block = HSBlock::filled(p, 0.0);
  const Tensor x = rng.uniform_tensor({16, 5, 5}, 0.5, 1.0);
  const Tensor y = hs_forward(block, x);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t c = 0; c < 16; ++c)
    for (std::size_t i = 0; i < 25; ++i) {
      EXPECT_EQ(y[c * 25 + i], c < 2 ? x[c * 25 + i] : 0.0);
    }
}

TEST(HsForwardTest, IdentityFilterTracesDataflow) {
  const HSBlockParams p{4, 2.0, 2, 1};  // C_0 = 4, C_1 = 6
  Tensor f({6, 6, 1, 1});
  for (std::size_t c = 0; c < 6; ++c) f[c * 6 + c] = 1.0;
  const HSBlock block(p, {f});
  Rng rng(6);
  const Tensor x = rng.uniform_tensor({8, 3, 2}, -1, 1);
  const Tensor y = hs_forward(block, x);
  // concat(x_1[0:2], x_2, x_1[2:4])
  const Tensor expected = concat0({x.slice0(0, 2), x.slice0(4, 8), x.slice0(2, 4)});
  EXPECT_TRUE(bitwise_equal(y, expected));
}

TEST(HsForwardTest, ShapePreservingWithSamePadding) {
  Rng rng(7);
  const HSBlock block = HSBlock::random({16, 4.0, 4, 3}, rng);
  EXPECT_EQ(hs_forward(block, rng.uniform_tensor({64, 8, 8}, -1, 1)).shape(), (Shape{64, 8, 8}));
  EXPECT_THROW(hs_forward(block, Tensor({63, 8, 8})), DimensionError);
}

TEST(HsForwardTest, ChannelConservationOnRandomConfigs) {
  Rng rng(8);
  int checked = 0;
  while (checked < 25) {
    const std::size_t s = 2 + rng.index(5);
    const std::size_t c0 = std::size_t{2} << rng.index(4);
    const std::size_t k = rng.index(2) ? 3 : 1;
    const HSBlockParams p{c0 * s, 1.0, s, k};
    if (!exact_halving(p.w, p.t, p.s)) continue;
    const HSBlock block = HSBlock::random(p, rng);
    const std::size_t h = k + rng.index(4), w = k + rng.index(4);
    const Tensor y = hs_forward(block, rng.uniform_tensor({s * c0, h, w}, -1, 1));
    EXPECT_EQ(y.shape(), (Shape{s * c0, h, w}));
    const auto groups = block.output_groups();
    EXPECT_EQ(groups.back().second, s * c0);
    ++checked;
  }
}

TEST(HsForwardTest, GraphMatchesDirectForward) {
  Rng rng(9);
  const HSBlock block = HSBlock::random({24, 1.0, 3, 3}, rng);
  const Tensor x = rng.uniform_tensor({24, 5, 4}, -1, 1);
  Graph g;
  const Var y = block.forward_graph(g, g.leaf("x"));
  g.set_output(g.sum(y));
  const auto values = g.forward({{"x", x}});
  EXPECT_TRUE(bitwise_equal(values[y.id], hs_forward(block, x)));
}

// Spatial support of d(sum of output group i at the centre pixel)/dx.
std::size_t influence_area(const HSBlock& block, std::size_t group, std::size_t h, std::size_t w) {
  const auto [begin, end] = block.output_groups()[group];
  const std::size_t channels = block.params().channels();
  Tensor mask({channels, h, w});
  for (std::size_t c = begin; c < end; ++c) mask(c, h / 2, w / 2) = 1.0;
  Graph g;
  g.set_output(g.sum(g.mul(block.forward_graph(g, g.leaf("x")), g.constant(mask))));
  const Tensor grad = g.gradient({{"x", Tensor({channels, h, w}, 1.0)}}).at("x");
  std::size_t area = 0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      bool touched = false;
      for (std::size_t c = 0; c < channels; ++c) touched |= grad(c, i, j) != 0.0;
      area += touched;
    }
  return area;
}

TEST(HsForwardTest, LaterGroupsSeeLargerReceptiveFields) {
  const HSBlock block = HSBlock::filled({32, 1.0, 4, 3}, 1.0);
  std::vector<std::size_t> areas;
  for (std::size_t i = 0; i < 4; ++i) areas.push_back(influence_area(block, i, 11, 11));
  EXPECT_EQ(areas, (std::vector<std::size_t>{1, 9, 25, 49}));
  for (std::size_t i = 1; i < areas.size(); ++i) EXPECT_GE(areas[i], areas[i - 1]);
}

}  // namespace
}  // namespace hsdssa
