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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hsdssa {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major array of doubles. Every extent is positive and the data
/// length always equals the product of the extents.
class Tensor {
 public:
  Tensor() : shape_{1}, data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value) { return Tensor(Shape{1}, {value}); }
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& operator()(std::size_t c, std::size_t i, std::size_t j) {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }
  double operator()(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  /// Same data under a new shape with the same element count.
  Tensor reshaped(Shape shape) const;

  /// Contiguous range [begin, end) along axis 0.
  Tensor slice0(std::size_t begin, std::size_t end) const;

  double item() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Element-by-element bit comparison (distinguishes -0.0 from 0.0).
bool bitwise_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool all_finite(const Tensor& t);

// ---- kernels -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double alpha);
double sum(const Tensor& a);
double mean(const Tensor& a);

/// Row-wise softmax with max subtraction. -inf entries map to exactly 0; a
/// row with no finite entry is an InputError.
Tensor softmax_rows(const Tensor& a);

/// Normalizes each slice spanned by `axes` to zero mean and unit population
/// variance, then applies gamma * x + beta. gamma and beta hold one value per
/// slice, i.e. their element count is the product of the non-normalized
/// extents (row-major over those axes).
Tensor layer_norm(const Tensor& x, const std::vector<std::size_t>& axes,
                  const Tensor& gamma, const Tensor& beta, double eps);

struct ConvParams {
  std::size_t stride = 1;
  // One entry per spatial axis, or a single entry applied to all of them.
  std::vector<std::size_t> padding{0};
};

/// Zero-padded cross-correlation. Rank 1: x [Cin x T], w [Cout x Cin x k].
/// Rank 2: x [Cin x H x W], w [Cout x Cin x k x k]. The spatial rank is
/// x.rank() - 1.
Tensor conv(const Tensor& x, const Tensor& w, const ConvParams& params);

/// sign(z) * sqrt(|z|), elementwise.
Tensor signed_sqrt(const Tensor& x);

Tensor relu(const Tensor& x);

/// Concatenation along axis 0; trailing extents must agree.
Tensor concat0(const std::vector<Tensor>& parts);

/// x[c, ...] * scale[c] + shift[c] for rank >= 2 tensors.
Tensor channel_affine(const Tensor& x, const Tensor& scale, const Tensor& shift);

/// Output extent of a convolution along one axis.
std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                            std::size_t pad);

namespace detail {

// For each flat index of `shape`, the row-major index of its slice over the
// axes not in `axes`. Shared by layer_norm and its reverse-mode rule.
std::vector<std::size_t> layer_norm_slice_ids(const Shape& shape,
                                              const std::vector<std::size_t>& axes,
                                              std::size_t& slice_count,
                                              std::size_t& slice_size);

}  // namespace detail

}  // namespace hsdssa
