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

#include "hsdssa/fmat.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "hsdssa/error.hpp"
#include "hsdssa/hs_block.hpp"
#include "hsdssa/random.hpp"
#include "hsdssa/weight_store.hpp"

namespace hsdssa {
namespace {

TEST(FmatTest, HeaderLayoutIsLittleEndian) {
  std::ostringstream out;
  write_fmat(out, Tensor::matrix({{1.0, -2.0, 0.5}}));
  const std::string bytes = out.str();
  ASSERT_EQ(bytes.size(), 12u + 3 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "FMAT");
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(8, 4), std::string("\x03\x00\x00\x00", 4));
  // 1.0f = 0x3f800000
  EXPECT_EQ(bytes.substr(12, 4), std::string("\x00\x00\x80\x3f", 4));
}

TEST(FmatTest, RoundTripRoundsToFloat) {
  Rng rng(2);
  const Tensor m = rng.uniform_tensor({7, 5}, -10, 10);
  std::stringstream buf;
  write_fmat(buf, m);
  const Tensor back = read_fmat(buf);
  ASSERT_EQ(back.shape(), m.shape());
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(m[i])));
  }
}

TEST(FmatTest, MalformedInput) {
  std::istringstream bad_magic(std::string("FMAX\x01\x00\x00\x00\x01\x00\x00\x00\x00\x00\x00\x00", 16));
  EXPECT_THROW(read_fmat(bad_magic), FormatError);
  std::istringstream truncated(std::string("FMAT\x02\x00\x00\x00\x02\x00\x00\x00\x00\x00", 14));
  EXPECT_THROW(read_fmat(truncated), FormatError);
  EXPECT_THROW(read_fmat(std::filesystem::path("/nonexistent/x.fmat")), InputError);
  std::ostringstream out;
  EXPECT_THROW(write_fmat(out, Tensor({2, 2, 2})), DimensionError);
}

TEST(FmatTest, AtomicFileWriteLeavesNoTemporary) {
  const auto dir = std::filesystem::temp_directory_path() / "hsdssa_fmat_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.fmat";
  write_fmat(path, Tensor::matrix({{1, 2}, {3, 4}}));
  EXPECT_TRUE(std::filesystem::exists(path));
  EXPECT_FALSE(std::filesystem::exists(dir / "m.fmat.tmp"));
  EXPECT_EQ(read_fmat(path).values(), (std::vector<double>{1, 2, 3, 4}));
  std::filesystem::remove_all(dir);
}

TEST(WeightStoreTest, HSBlockRoundTripThroughManifest) {
  const auto dir = std::filesystem::temp_directory_path() / "hsdssa_hs_store";
  std::filesystem::remove_all(dir);
  Rng rng(4);
  const HSBlock block = HSBlock::random({16, 1.5, 4, 3}, rng);
  save_hs_block(dir, block);
  const HSBlock back = load_hs_block(dir);
  EXPECT_EQ(back.params().s, 4u);
  ASSERT_EQ(back.filters().size(), block.filters().size());
  for (std::size_t j = 0; j < block.filters().size(); ++j) {
    ASSERT_EQ(back.filters()[j].shape(), block.filters()[j].shape());
    for (std::size_t i = 0; i < block.filters()[j].size(); ++i) {
      EXPECT_EQ(back.filters()[j][i], static_cast<double>(static_cast<float>(block.filters()[j][i])));
    }
  }
  const auto bundle = load_weights(dir);
  EXPECT_EQ(bundle.meta.at("groups").size(), 3u);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace hsdssa
