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

#include "hsdssa/backbone.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "hsdssa/error.hpp"

namespace hsdssa {
namespace {

namespace fs = std::filesystem;

Tensor features(std::size_t frames, std::size_t bins, std::uint64_t seed) {
  Rng rng(seed);
  return rng.uniform_tensor({frames, bins}, -1, 1);
}

double relative_norm_diff(const Tensor& a, const Tensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

class VariantTest : public ::testing::TestWithParam<Variant> {};

TEST_P(VariantTest, EmbeddingShapeAndFiniteness) {
  const Model m = build_model(BackboneConfig::toy(GetParam()), 1);
  const Tensor e = embed(m, features(24, 16, 2));
  EXPECT_EQ(e.shape(), (Shape{32}));
  EXPECT_TRUE(all_finite(e));
}

TEST_P(VariantTest, SameSeedIsBitwiseIdentical) {
  const BackboneConfig cfg = BackboneConfig::toy(GetParam());
  const Model a = build_model(cfg, 11), b = build_model(cfg, 11), c = build_model(cfg, 12);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_TRUE(bitwise_equal(pa[i].value, pb[i].value)) << pa[i].name;
    any_diff |= !bitwise_equal(pa[i].value, pc[i].value);
  }
  EXPECT_TRUE(any_diff);
  const Tensor x = features(20, 16, 3);
  EXPECT_TRUE(bitwise_equal(embed(a, x), embed(b, x)));
  EXPECT_TRUE(bitwise_equal(embed(a, x), embed(a, x)));
}

TEST_P(VariantTest, RejectsShortOrMismatchedInput) {
  const Model m = build_model(BackboneConfig::toy(GetParam()), 1);
  try {
    embed(m, features(15, 16, 1));
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("16"), std::string::npos);
  }
  EXPECT_THROW(embed(m, features(20, 15, 1)), InputError);
}

TEST_P(VariantTest, DssaInsertionKeepsEveryShape) {
  BackboneConfig cfg = BackboneConfig::toy(GetParam());
  cfg.dssa.reset();
  const auto plain = build_model(cfg, 4).trace(features(32, 16, 5));
  for (int stage = 1; stage <= 4; ++stage) {
    cfg.dssa = DSSASettings{.after_stage = stage};
    const auto with = build_model(cfg, 4).trace(features(32, 16, 5));
    ASSERT_TRUE(with.attention.has_value());
    for (std::size_t i = 0; i < 4; ++i)
      EXPECT_EQ(with.stage_outputs[i].shape(), plain.stage_outputs[i].shape());
    EXPECT_EQ(with.embedding.shape(), plain.embedding.shape());
    EXPECT_EQ(with.attention->y.shape(), plain.stage_outputs[stage - 1].shape());
  }
}

TEST_P(VariantTest, SaveLoadRoundTrip) {
  const fs::path dir = fs::path(::testing::TempDir()) / ("model_" + to_string(GetParam()));
  fs::remove_all(dir);
  const Model m = build_model(BackboneConfig::toy(GetParam()), 21);
  save_model(dir, m);
  const Model back = load_model(dir / "manifest.json");
  // Payloads are float32: the loaded model equals the original with every
  // weight rounded to float.
  Model rounded = m;
  auto params = m.parameters();
  for (auto& p : params)
    for (double& v : p.value.data()) v = static_cast<double>(static_cast<float>(v));
  rounded.load_parameters(params);
  const auto loaded = back.parameters();
  ASSERT_EQ(loaded.size(), params.size());
  for (std::size_t i = 0; i < loaded.size(); ++i)
    EXPECT_TRUE(bitwise_equal(loaded[i].value, params[i].value)) << params[i].name;
  const Tensor x = features(20, 16, 6);
  EXPECT_TRUE(bitwise_equal(embed(rounded, x), embed(back, x)));
  EXPECT_LT(relative_norm_diff(embed(back, x), embed(m, x)), 1e-5);
  EXPECT_EQ(back.seed(), 21u);
  EXPECT_THROW(load_model(dir / "manifest.json", 3), ConfigError);
  fs::remove_all(dir);
}

INSTANTIATE_TEST_SUITE_P(AllVariants, VariantTest,
                         ::testing::Values(Variant::kResNet34, Variant::kResNet50,
                                           Variant::kHSResNet50),
                         [](const auto& info) { return to_string(info.param); });

TEST(BackboneTest, StagePlan) {
  BackboneConfig cfg = BackboneConfig::toy(Variant::kResNet34);
  const Model m = build_model(cfg, 1);
  const std::array<std::size_t, 4> blocks{3, 4, 6, 3};
  for (std::size_t s = 0; s < 4; ++s) {
    ASSERT_EQ(m.stages()[s].size(), blocks[s]);
    for (const auto& b : m.stages()[s]) EXPECT_TRUE(std::holds_alternative<BasicBlock>(b));
  }
  const auto layout = m.stage_layout();
  EXPECT_EQ(layout[0], (std::pair<std::size_t, std::size_t>{4, 16}));
  EXPECT_EQ(layout[3], (std::pair<std::size_t, std::size_t>{32, 2}));
}

TEST(BackboneTest, EveryHsBottleneckCarriesAnHsBlock) {
  BackboneConfig cfg;
  cfg.variant = Variant::kHSResNet50;
  cfg.initial_channels = 32;
  cfg.hs = HSSettings{};
  cfg.feature_dim = 16;
  const Model m = build_model(cfg, 1);
  std::size_t count = 0;
  for (const auto& stage : m.stages())
    for (const auto& b : stage) {
      const auto& bottleneck = std::get<Bottleneck>(b);
      ASSERT_TRUE(std::holds_alternative<HSUnit>(bottleneck.middle));
      EXPECT_EQ(std::get<HSUnit>(bottleneck.middle).block.params().s, 8u);
      ++count;
    }
  EXPECT_EQ(count, 16u);
}

TEST(BackboneTest, HsAndPlainBottlenecksShareStageShapes) {
  const Tensor x = features(40, 16, 7);
  BackboneConfig a = BackboneConfig::toy(Variant::kResNet50);
  BackboneConfig b = BackboneConfig::toy(Variant::kHSResNet50);
  const auto ta = build_model(a, 2).trace(x), tb = build_model(b, 2).trace(x);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_EQ(ta.stage_outputs[i].shape(), tb.stage_outputs[i].shape());
}

TEST(BackboneTest, TwoHundredFramesBySixtyFourBins) {
  BackboneConfig cfg = BackboneConfig::toy(Variant::kResNet34);
  cfg.feature_dim = 64;
  const Tensor e = embed(build_model(cfg, 1), features(200, 64, 8));
  EXPECT_EQ(e.size(), cfg.embedding_dim);
  EXPECT_TRUE(all_finite(e));
}

TEST(BackboneTest, PoolingIsIdempotentOverRepeatedContent) {
  BackboneConfig cfg = BackboneConfig::toy(Variant::kResNet34);
  const Model m = build_model(cfg, 3);
  const Tensor fmap = m.trace(features(32, 16, 9)).stage_outputs[3];
  Tensor doubled({fmap.dim(0), 2 * fmap.dim(1), fmap.dim(2)});
  for (std::size_t c = 0; c < fmap.dim(0); ++c)
    for (std::size_t t = 0; t < 2 * fmap.dim(1); ++t)
      for (std::size_t f = 0; f < fmap.dim(2); ++f) doubled(c, t, f) = fmap(c, t % fmap.dim(1), f);
  EXPECT_LT(relative_norm_diff(m.pool_and_project(doubled), m.pool_and_project(fmap)), 1e-12);
}

TEST(BackboneTest, PointwiseDssaIsIdempotentOverRepeatedContent) {
  // Duplicating every key/value row leaves each softmax row's weighted
  // average unchanged, and the (T, W) layer norms see the same statistics.
  Rng rng(10);
  const DSSAConfig cfg = DSSAConfig::random(3, 4, 1, rng);
  const Tensor x = rng.uniform_tensor({3, 5, 4}, -1, 1);
  Tensor doubled({3, 10, 4});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 10; ++t)
      for (std::size_t f = 0; f < 4; ++f) doubled(c, t, f) = x(c, t % 5, f);
  const Tensor y = dssa_forward(cfg, x).y, y2 = dssa_forward(cfg, doubled).y;
  double worst = 0.0;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 10; ++t)
      for (std::size_t f = 0; f < 4; ++f) worst = std::max(worst, std::abs(y2(c, t, f) - y(c, t % 5, f)));
  EXPECT_LT(worst, 1e-12);
}

TEST(BackboneTest, DuplicatedInputDriftShrinksWithLength) {
  // End to end, zero padding at the edges and at the seam of the two copies
  // perturbs O(1/T) of the frames, so the embedding is only asymptotically
  // unchanged by duplication.
  BackboneConfig cfg = BackboneConfig::toy(Variant::kResNet34);
  cfg.dssa = DSSASettings{};
  const Model m = build_model(cfg, 1);
  auto drift = [&](std::size_t frames) {
    const Tensor x = features(frames, 16, 3);
    Tensor doubled({2 * frames, 16});
    for (std::size_t t = 0; t < 2 * frames; ++t)
      for (std::size_t f = 0; f < 16; ++f) doubled(t, f) = x(t % frames, f);
    return relative_norm_diff(embed(m, doubled), embed(m, x));
  };
  EXPECT_LT(drift(128), 0.5 * drift(32));
}

TEST(BackboneTest, ConfigJsonIsStrictAndRoundTrips) {
  BackboneConfig cfg = BackboneConfig::toy(Variant::kHSResNet50);
  cfg.dssa = DSSASettings{.after_stage = 2, .kernel = 3, .topk = 5};
  const BackboneConfig back = BackboneConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  auto j = cfg.to_json();
  j["typo"] = 1;
  EXPECT_THROW(BackboneConfig::from_json(j), ConfigError);
  auto bad_variant = cfg.to_json();
  bad_variant["variant"] = "resnet18";
  EXPECT_THROW(BackboneConfig::from_json(bad_variant), ConfigError);
}

TEST(BackboneTest, InconsistentConfigsAreRejected) {
  BackboneConfig cfg = BackboneConfig::toy(Variant::kResNet50);
  cfg.hs = HSSettings{};
  EXPECT_THROW(cfg.validate(), ConfigError);
  BackboneConfig hs = BackboneConfig::toy(Variant::kHSResNet50);
  hs.hs.reset();
  EXPECT_THROW(hs.validate(), ConfigError);
  BackboneConfig stage = BackboneConfig::toy(Variant::kResNet34);
  stage.dssa = DSSASettings{.after_stage = 5};
  EXPECT_THROW(stage.validate(), ConfigError);
  BackboneConfig narrow = BackboneConfig::toy(Variant::kHSResNet50);
  narrow.hs = HSSettings{.s = 8, .t = 1.5};
  EXPECT_THROW(build_model(narrow, 1), ConfigError);  // C_0 = floor(4 * 1.5 / 8) = 0
}

}  // namespace
}  // namespace hsdssa
