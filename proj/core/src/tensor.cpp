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

#include "hsdssa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>

#include "hsdssa/error.hpp"

namespace hsdssa {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
  }
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same_shape(a, b, op);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty()) throw DimensionError("tensor: rank-0 shapes are not supported");
  for (auto e : shape_) {
    if (e == 0) throw DimensionError("tensor: zero extent in " + to_string(shape_));
  }
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : Tensor(std::move(shape)) {
  if (data.size() != data_.size()) {
    throw DimensionError("tensor: " + std::to_string(data.size()) +
                         " values for shape " + to_string(shape_));
  }
  data_ = std::move(data);
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw DimensionError("matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{m, n}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != size()) {
    throw DimensionError("reshape: " + to_string(shape_) + " -> " + to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice0(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > shape_[0]) {
    throw DimensionError("slice0: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of " + to_string(shape_));
  }
  Shape s = shape_;
  s[0] = end - begin;
  const std::size_t inner = size() / shape_[0];
  return Tensor(std::move(s), std::vector<double>(data_.begin() + begin * inner,
                                                  data_.begin() + end * inner));
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item: tensor of shape " + to_string(shape_));
  return data_[0];
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner extents differ, " + to_string(a.shape()) +
                         " x " + to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), p = a.dim(1), n = b.dim(1);
  Tensor out(Shape{m, n});
  // i-k-j order: each output element accumulates over k in increasing order.
  for (std::size_t i = 0; i < m; ++i) {
    double* row = &out(i, 0);
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = a(i, k);
      const double* brow = b.data().data() + k * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  Tensor out(Shape{a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) out(j, i) = a(i, j);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  return zip(a, b, "hadamard", [](double x, double y) { return x * y; });
}

Tensor scale(const Tensor& a, double alpha) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * alpha;
  return out;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return s;
}

double mean(const Tensor& a) { return sum(a) / static_cast<double>(a.size()); }

Tensor softmax_rows(const Tensor& a) {
  require_rank(a, 2, "softmax_rows");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, a(i, j));
    if (mx == -std::numeric_limits<double>::infinity()) {
      throw InputError("softmax_rows: row " + std::to_string(i) + " is entirely -inf");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = a(i, j);
      const double e = std::isinf(v) && v < 0 ? 0.0 : std::exp(v - mx);
      out(i, j) = e;
      total += e;
    }
    for (std::size_t j = 0; j < cols; ++j) out(i, j) /= total;
  }
  return out;
}

namespace detail {

std::vector<std::size_t> layer_norm_slice_ids(const Shape& shape,
                                              const std::vector<std::size_t>& axes,
                                              std::size_t& slice_count,
                                              std::size_t& slice_size) {
  std::vector<bool> normalized(shape.size(), false);
  if (axes.empty()) throw DimensionError("layer_norm: empty axis set");
  for (auto ax : axes) {
    if (ax >= shape.size() || normalized[ax]) {
      throw DimensionError("layer_norm: bad axis " + std::to_string(ax) + " for shape " +
                           to_string(shape));
    }
    normalized[ax] = true;
  }
  slice_count = 1;
  slice_size = 1;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    (normalized[d] ? slice_size : slice_count) *= shape[d];
  }
  const std::size_t n = element_count(shape);
  std::vector<std::size_t> ids(n);
  std::vector<std::size_t> coord(shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t id = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) {
      if (!normalized[d]) id = id * shape[d] + coord[d];
    }
    ids[flat] = id;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++coord[d] < shape[d]) break;
      coord[d] = 0;
    }
  }
  return ids;
}

}  // namespace detail

Tensor layer_norm(const Tensor& x, const std::vector<std::size_t>& axes,
                  const Tensor& gamma, const Tensor& beta, double eps) {
  if (!(eps > 0.0)) throw InputError("layer_norm: eps must be positive");
  std::size_t slices = 0, count = 0;
  const auto ids = detail::layer_norm_slice_ids(x.shape(), axes, slices, count);
  if (gamma.size() != slices || beta.size() != slices) {
    throw DimensionError("layer_norm: affine parameters need " + std::to_string(slices) +
                         " entries, got gamma " + to_string(gamma.shape()) + ", beta " +
                         to_string(beta.shape()));
  }
  std::vector<double> mu(slices, 0.0), var(slices, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) mu[ids[i]] += x[i];
  for (auto& m : mu) m /= static_cast<double>(count);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mu[ids[i]];
    var[ids[i]] += d * d;
  }
  std::vector<double> inv_std(slices);
  for (std::size_t s = 0; s < slices; ++s) {
    inv_std[s] = 1.0 / std::sqrt(var[s] / static_cast<double>(count) + eps);
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t s = ids[i];
    out[i] = gamma[s] * ((x[i] - mu[s]) * inv_std[s]) + beta[s];
  }
  return out;
}

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                            std::size_t pad) {
  if (stride == 0) throw InputError("conv: stride must be positive");
  if (k == 0 || in + 2 * pad < k) {
    throw DimensionError("conv: kernel " + std::to_string(k) + " larger than padded input " +
                         std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - k) / stride + 1;
}

namespace {

// Shared 2-D kernel. Rank-1 convolution is routed through it with H = 1.
void conv2d_kernel(const double* x, std::size_t cin, std::size_t h, std::size_t w,
                   const double* wt, std::size_t cout, std::size_t kh, std::size_t kw,
                   std::size_t sh, std::size_t sw, std::size_t ph, std::size_t pw,
                   double* out, std::size_t oh, std::size_t ow) {
  for (std::size_t oc = 0; oc < cout; ++oc) {
    double* o = out + oc * oh * ow;
    for (std::size_t ic = 0; ic < cin; ++ic) {
      const double* xi = x + ic * h * w;
      const double* wk = wt + (oc * cin + ic) * kh * kw;
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
          const double wv = wk[a * kw + b];
          for (std::size_t r = 0; r < oh; ++r) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(r * sh + a) -
                                      static_cast<std::ptrdiff_t>(ph);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* xrow = xi + ih * w;
            double* orow = o + r * ow;
            for (std::size_t c = 0; c < ow; ++c) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(c * sw + b) -
                                        static_cast<std::ptrdiff_t>(pw);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
              orow[c] += wv * xrow[iw];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv(const Tensor& x, const Tensor& w, const ConvParams& params) {
  const std::size_t spatial = x.rank() - 1;
  if (spatial != 1 && spatial != 2) {
    throw DimensionError("conv: input must be rank 2 or 3, got " + to_string(x.shape()));
  }
  if (w.rank() != spatial + 2) {
    throw DimensionError("conv: weights " + to_string(w.shape()) + " do not match input " +
                         to_string(x.shape()));
  }
  if (w.dim(1) != x.dim(0)) {
    throw DimensionError("conv: weights expect " + std::to_string(w.dim(1)) +
                         " input channels, input " + to_string(x.shape()));
  }
  if (params.padding.size() != 1 && params.padding.size() != spatial) {
    throw DimensionError("conv: padding needs 1 or " + std::to_string(spatial) + " entries");
  }
  const auto pad = [&](std::size_t axis) {
    return params.padding.size() == 1 ? params.padding[0] : params.padding[axis];
  };
  const std::size_t cout = w.dim(0), cin = w.dim(1);
  if (spatial == 1) {
    const std::size_t t = x.dim(1), k = w.dim(2);
    const std::size_t ot = conv_out_extent(t, k, params.stride, pad(0));
    Tensor out(Shape{cout, ot});
    conv2d_kernel(x.data().data(), cin, 1, t, w.data().data(), cout, 1, k, 1, params.stride,
                  0, pad(0), out.data().data(), 1, ot);
    return out;
  }
  if (w.dim(2) != w.dim(3)) throw DimensionError("conv: kernels must be square");
  const std::size_t h = x.dim(1), wd = x.dim(2), k = w.dim(2);
  const std::size_t oh = conv_out_extent(h, k, params.stride, pad(0));
  const std::size_t ow = conv_out_extent(wd, k, params.stride, pad(1));
  Tensor out(Shape{cout, oh, ow});
  conv2d_kernel(x.data().data(), cin, h, wd, w.data().data(), cout, k, k, params.stride,
                params.stride, pad(0), pad(1), out.data().data(), oh, ow);
  return out;
}

Tensor signed_sqrt(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    out[i] = v < 0.0 ? -std::sqrt(-v) : std::sqrt(v);
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor concat0(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat0: nothing to concatenate");
  Shape s = parts.front().shape();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.rank() != s.size() || !std::equal(p.shape().begin() + 1, p.shape().end(),
                                            s.begin() + 1)) {
      throw DimensionError("concat0: " + to_string(p.shape()) + " incompatible with " +
                           to_string(s));
    }
    rows += p.dim(0);
  }
  s[0] = rows;
  std::vector<double> data;
  data.reserve(element_count(s));
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return Tensor(std::move(s), std::move(data));
}

Tensor channel_affine(const Tensor& x, const Tensor& scale_, const Tensor& shift) {
  if (x.rank() < 2 || scale_.size() != x.dim(0) || shift.size() != x.dim(0)) {
    throw DimensionError("channel_affine: parameters " + to_string(scale_.shape()) +
                         " do not match " + to_string(x.shape()));
  }
  const std::size_t inner = x.size() / x.dim(0);
  Tensor out(x.shape());
  for (std::size_t c = 0; c < x.dim(0); ++c) {
    for (std::size_t i = 0; i < inner; ++i) {
      out[c * inner + i] = x[c * inner + i] * scale_[c] + shift[c];
    }
  }
  return out;
}

}  // namespace hsdssa
