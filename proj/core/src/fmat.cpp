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

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "hsdssa/error.hpp"
#include "hsdssa/file_util.hpp"

namespace hsdssa {

namespace {

constexpr std::array<char, 4> kMagic{'F', 'M', 'A', 'T'};

std::uint32_t load_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void store_u32(unsigned char* p, std::uint32_t v) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

}  // namespace

Tensor read_fmat(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) {
    throw FormatError("FMAT: bad magic");
  }
  unsigned char header[8];
  if (!in.read(reinterpret_cast<char*>(header), 8)) {
    throw FormatError("FMAT: truncated header");
  }
  const std::uint32_t rows = load_u32(header), cols = load_u32(header + 4);
  if (rows == 0 || cols == 0) throw FormatError("FMAT: zero extent");
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> raw(n * 4);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw FormatError("FMAT: truncated payload, expected " + std::to_string(n) + " floats");
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = static_cast<double>(std::bit_cast<float>(load_u32(&raw[i * 4])));
  }
  return Tensor(Shape{rows, cols}, std::move(data));
}

Tensor read_fmat(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  try {
    return read_fmat(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_fmat(std::ostream& out, const Tensor& matrix) {
  if (matrix.rank() != 2) {
    throw DimensionError("FMAT: only rank-2 tensors, got " + to_string(matrix.shape()));
  }
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  if (matrix.dim(0) > kMax || matrix.dim(1) > kMax) throw DimensionError("FMAT: extent overflow");
  std::vector<unsigned char> buf(12 + matrix.size() * 4);
  std::memcpy(buf.data(), kMagic.data(), 4);
  store_u32(&buf[4], static_cast<std::uint32_t>(matrix.dim(0)));
  store_u32(&buf[8], static_cast<std::uint32_t>(matrix.dim(1)));
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    store_u32(&buf[12 + i * 4], std::bit_cast<std::uint32_t>(static_cast<float>(matrix[i])));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void write_fmat(const std::filesystem::path& path, const Tensor& matrix) {
  write_file_atomic(path, [&](std::ostream& out) { write_fmat(out, matrix); }, true);
}

}  // namespace hsdssa
