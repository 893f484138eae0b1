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

#include <filesystem>
#include <iosfwd>

#include "hsdssa/tensor.hpp"

namespace hsdssa {

// FMAT container for rank-2 tensors:
//   "FMAT" | u32 rows (LE) | u32 cols (LE) | rows*cols float32 (LE), row-major.
// Values are promoted to double on read and rounded to float32 on write.

Tensor read_fmat(std::istream& in);
Tensor read_fmat(const std::filesystem::path& path);

void write_fmat(std::ostream& out, const Tensor& matrix);
/// Writes through a temporary file and renames it into place.
void write_fmat(const std::filesystem::path& path, const Tensor& matrix);

}  // namespace hsdssa
