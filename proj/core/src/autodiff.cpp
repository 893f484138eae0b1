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

#include "hsdssa/autodiff.hpp"

#include <cmath>
#include <optional>

#include "hsdssa/attention.hpp"
#include "hsdssa/error.hpp"

namespace hsdssa {

const char* op_name(Graph::Op op) {
  switch (op) {
    case Graph::Op::kLeaf: return "leaf";
    case Graph::Op::kConstant: return "constant";
    case Graph::Op::kMatmul: return "matmul";
    case Graph::Op::kTranspose: return "transpose";
    case Graph::Op::kAdd: return "add";
    case Graph::Op::kSub: return "sub";
    case Graph::Op::kMul: return "mul";
    case Graph::Op::kScale: return "scale";
    case Graph::Op::kConv: return "conv";
    case Graph::Op::kSoftmaxRows: return "softmax_rows";
    case Graph::Op::kLayerNorm: return "layer_norm";
    case Graph::Op::kSignedSqrt: return "signed_sqrt";
    case Graph::Op::kTopkMask: return "topk_mask";
    case Graph::Op::kRelu: return "relu";
    case Graph::Op::kSum: return "sum";
    case Graph::Op::kMean: return "mean";
    case Graph::Op::kSlice0: return "slice0";
    case Graph::Op::kConcat0: return "concat0";
    case Graph::Op::kReshape: return "reshape";
  }
  return "?";
}

Graph::Node Graph::make_node(Op op, std::vector<std::size_t> inputs) {
  Node n;
  n.op = op;
  n.inputs = std::move(inputs);
  return n;
}

Var Graph::push(Node node) {
  for (auto in : node.inputs) check(Var{in});
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Graph::check(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("graph: unknown node " + std::to_string(v.id));
}

Var Graph::leaf(const std::string& name) {
  if (auto it = leaves_.find(name); it != leaves_.end()) return Var{it->second};
  Node n = make_node(Op::kLeaf);
  n.name = name;
  Var v = push(std::move(n));
  leaves_[name] = v.id;
  return v;
}

Var Graph::constant(Tensor value) {
  Node n = make_node(Op::kConstant);
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) { return push(make_node(Op::kMatmul, {a.id, b.id})); }
Var Graph::transpose(Var a) { return push(make_node(Op::kTranspose, {a.id})); }
Var Graph::add(Var a, Var b) { return push(make_node(Op::kAdd, {a.id, b.id})); }
Var Graph::sub(Var a, Var b) { return push(make_node(Op::kSub, {a.id, b.id})); }
Var Graph::mul(Var a, Var b) { return push(make_node(Op::kMul, {a.id, b.id})); }

Var Graph::scale(Var a, double alpha) {
  Node n = make_node(Op::kScale, {a.id});
  n.alpha = alpha;
  return push(std::move(n));
}

Var Graph::conv(Var x, Var w, ConvParams params) {
  Node n = make_node(Op::kConv, {x.id, w.id});
  n.conv = std::move(params);
  return push(std::move(n));
}

Var Graph::softmax_rows(Var a) { return push(make_node(Op::kSoftmaxRows, {a.id})); }

Var Graph::layer_norm(Var x, std::vector<std::size_t> axes, Var gamma, Var beta, double eps) {
  Node n = make_node(Op::kLayerNorm, {x.id, gamma.id, beta.id});
  n.axes = std::move(axes);
  n.eps = eps;
  return push(std::move(n));
}

Var Graph::signed_sqrt(Var a) { return push(make_node(Op::kSignedSqrt, {a.id})); }

Var Graph::topk_mask(Var a, std::size_t k) {
  if (k < 1) throw ContractError("topk_mask: k must be >= 1");
  Node n = make_node(Op::kTopkMask, {a.id});
  n.k = k;
  return push(std::move(n));
}

Var Graph::relu(Var a) { return push(make_node(Op::kRelu, {a.id})); }
Var Graph::sum(Var a) { return push(make_node(Op::kSum, {a.id})); }
Var Graph::mean(Var a) { return push(make_node(Op::kMean, {a.id})); }

Var Graph::slice0(Var a, std::size_t begin, std::size_t end) {
  Node n = make_node(Op::kSlice0, {a.id});
  n.begin = begin;
  n.end = end;
  return push(std::move(n));
}

Var Graph::concat0(const std::vector<Var>& parts) {
  Node n = make_node(Op::kConcat0);
  for (auto p : parts) n.inputs.push_back(p.id);
  return push(std::move(n));
}

Var Graph::reshape(Var a, Shape shape) {
  Node n = make_node(Op::kReshape, {a.id});
  n.shape = std::move(shape);
  return push(std::move(n));
}

void Graph::set_output(Var v) {
  check(v);
  output_ = v.id;
  has_output_ = true;
}

Var Graph::output() const {
  if (!has_output_) throw ContractError("graph: no output node set");
  return Var{output_};
}

std::vector<std::string> Graph::leaf_names() const {
  std::vector<std::string> names;
  for (const auto& [name, id] : leaves_) names.push_back(name);
  return names;
}

std::vector<Var> Graph::operands(Var v) const {
  check(v);
  std::vector<Var> out;
  for (auto in : nodes_[v.id].inputs) out.push_back(Var{in});
  return out;
}

std::string Graph::describe(Var v) const {
  check(v);
  const auto& n = nodes_[v.id];
  std::string s = "node " + std::to_string(v.id) + " (" + op_name(n.op);
  if (n.op == Op::kLeaf) s += " '" + n.name + "'";
  return s + ")";
}

std::vector<Tensor> Graph::forward(const Bindings& leaves) const {
  std::vector<Tensor> val;
  val.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    auto in = [&](std::size_t j) -> const Tensor& { return val[n.inputs[j]]; };
    switch (n.op) {
      case Op::kLeaf: {
        auto it = leaves.find(n.name);
        if (it == leaves.end()) throw InputError("graph: leaf '" + n.name + "' is not bound");
        val.push_back(it->second);
        break;
      }
      case Op::kConstant: val.push_back(n.value); break;
      case Op::kMatmul: val.push_back(hsdssa::matmul(in(0), in(1))); break;
      case Op::kTranspose: val.push_back(hsdssa::transpose(in(0))); break;
      case Op::kAdd: val.push_back(hsdssa::add(in(0), in(1))); break;
      case Op::kSub: val.push_back(hsdssa::sub(in(0), in(1))); break;
      case Op::kMul: val.push_back(hsdssa::hadamard(in(0), in(1))); break;
      case Op::kScale: val.push_back(hsdssa::scale(in(0), n.alpha)); break;
      case Op::kConv: val.push_back(hsdssa::conv(in(0), in(1), n.conv)); break;
      case Op::kSoftmaxRows: val.push_back(hsdssa::softmax_rows(in(0))); break;
      case Op::kLayerNorm:
        val.push_back(hsdssa::layer_norm(in(0), n.axes, in(1), in(2), n.eps));
        break;
      case Op::kSignedSqrt: val.push_back(hsdssa::signed_sqrt(in(0))); break;
      case Op::kTopkMask: val.push_back(hsdssa::topk_mask(in(0), n.k)); break;
      case Op::kRelu: val.push_back(hsdssa::relu(in(0))); break;
      case Op::kSum: val.push_back(Tensor::scalar(hsdssa::sum(in(0)))); break;
      case Op::kMean: val.push_back(Tensor::scalar(hsdssa::mean(in(0)))); break;
      case Op::kSlice0: val.push_back(in(0).slice0(n.begin, n.end)); break;
      case Op::kConcat0: {
        std::vector<Tensor> parts;
        for (std::size_t j = 0; j < n.inputs.size(); ++j) parts.push_back(in(j));
        val.push_back(hsdssa::concat0(parts));
        break;
      }
      case Op::kReshape: val.push_back(in(0).reshaped(n.shape)); break;
    }
  }
  return val;
}

double Graph::evaluate(const Bindings& leaves) const {
  const Var out = output();
  auto val = forward(leaves);
  const Tensor& y = val[out.id];
  if (y.size() != 1) {
    throw ContractError("graph: output " + describe(out) + " is not scalar, shape " +
                        to_string(y.shape()));
  }
  return y[0];
}

namespace {

void accumulate(std::optional<Tensor>& slot, const Tensor& g) {
  if (!slot) {
    slot = g;
  } else {
    slot = add(*slot, g);
  }
}

// Reverse rule shared by rank-1 and rank-2 convolutions. Mirrors the forward
// loop nest so the two stay index-compatible.
void conv_backward(const Tensor& x, const Tensor& w, const Tensor& gout,
                   const ConvParams& p, Tensor& dx, Tensor& dw) {
  const bool rank1 = x.rank() == 2;
  const std::size_t cin = x.dim(0);
  const std::size_t h = rank1 ? 1 : x.dim(1);
  const std::size_t wd = rank1 ? x.dim(1) : x.dim(2);
  const std::size_t cout = w.dim(0);
  const std::size_t kh = rank1 ? 1 : w.dim(2);
  const std::size_t kw = rank1 ? w.dim(2) : w.dim(3);
  const std::size_t sh = rank1 ? 1 : p.stride, sw = p.stride;
  const auto pad = [&](std::size_t axis) {
    return p.padding.size() == 1 ? p.padding[0] : p.padding[axis];
  };
  const std::size_t ph = rank1 ? 0 : pad(0), pw = rank1 ? pad(0) : pad(1);
  const std::size_t oh = rank1 ? 1 : gout.dim(1);
  const std::size_t ow = rank1 ? gout.dim(1) : gout.dim(2);
  dx = Tensor(x.shape());
  dw = Tensor(w.shape());
  for (std::size_t oc = 0; oc < cout; ++oc) {
    for (std::size_t ic = 0; ic < cin; ++ic) {
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
          const std::size_t widx = ((oc * cin + ic) * kh + a) * kw + b;
          const double wv = w[widx];
          double acc = 0.0;
          for (std::size_t r = 0; r < oh; ++r) {
            const auto ih = static_cast<std::ptrdiff_t>(r * sh + a) - static_cast<std::ptrdiff_t>(ph);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t c = 0; c < ow; ++c) {
              const auto iw = static_cast<std::ptrdiff_t>(c * sw + b) - static_cast<std::ptrdiff_t>(pw);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(wd)) continue;
              const std::size_t xi = (ic * h + static_cast<std::size_t>(ih)) * wd + static_cast<std::size_t>(iw);
              const double g = gout[(oc * oh + r) * ow + c];
              acc += x[xi] * g;
              dx[xi] += wv * g;
            }
          }
          dw[widx] += acc;
        }
      }
    }
  }
}

}  // namespace

Bindings Graph::gradient(const Bindings& leaves) const {
  const Var out = output();
  const auto val = forward(leaves);
  if (val[out.id].size() != 1) {
    throw ContractError("graph: output " + describe(out) + " is not scalar, shape " +
                        to_string(val[out.id].shape()));
  }
  if (!std::isfinite(val[out.id][0])) {
    throw NumericError("graph: output " + describe(out) + " is not finite");
  }

  std::vector<std::optional<Tensor>> grad(nodes_.size());
  grad[out.id] = Tensor::scalar(1.0);

  for (std::size_t i = out.id + 1; i-- > 0;) {
    if (!grad[i]) continue;
    const Node& n = nodes_[i];
    const Tensor& g = *grad[i];
    if (!all_finite(g)) {
      throw NumericError("graph: non-finite gradient at " + describe(Var{i}));
    }
    auto in = [&](std::size_t j) -> const Tensor& { return val[n.inputs[j]]; };
    auto send = [&](std::size_t j, const Tensor& t) { accumulate(grad[n.inputs[j]], t); };

    switch (n.op) {
      case Op::kLeaf:
      case Op::kConstant:
        break;
      case Op::kMatmul:
        send(0, hsdssa::matmul(g, hsdssa::transpose(in(1))));
        send(1, hsdssa::matmul(hsdssa::transpose(in(0)), g));
        break;
      case Op::kTranspose: send(0, hsdssa::transpose(g)); break;
      case Op::kAdd:
        send(0, g);
        send(1, g);
        break;
      case Op::kSub:
        send(0, g);
        send(1, hsdssa::scale(g, -1.0));
        break;
      case Op::kMul:
        send(0, hadamard(g, in(1)));
        send(1, hadamard(g, in(0)));
        break;
      case Op::kScale: send(0, hsdssa::scale(g, n.alpha)); break;
      case Op::kConv: {
        Tensor dx, dw;
        conv_backward(in(0), in(1), g, n.conv, dx, dw);
        send(0, dx);
        send(1, dw);
        break;
      }
      case Op::kSoftmaxRows: {
        // dx = y * (g - rowsum(g * y)); masked (-inf) inputs have y = 0.
        const Tensor& y = val[i];
        Tensor dx(y.shape());
        for (std::size_t r = 0; r < y.dim(0); ++r) {
          double dot = 0.0;
          for (std::size_t c = 0; c < y.dim(1); ++c) dot += g(r, c) * y(r, c);
          for (std::size_t c = 0; c < y.dim(1); ++c) dx(r, c) = y(r, c) * (g(r, c) - dot);
        }
        send(0, dx);
        break;
      }
      case Op::kLayerNorm: {
        const Tensor& x = in(0);
        const Tensor& gamma = in(1);
        std::size_t slices = 0, count = 0;
        const auto ids = detail::layer_norm_slice_ids(x.shape(), n.axes, slices, count);
        const double inv_count = 1.0 / static_cast<double>(count);
        std::vector<double> mu(slices, 0.0), var(slices, 0.0);
        for (std::size_t e = 0; e < x.size(); ++e) mu[ids[e]] += x[e];
        for (auto& m : mu) m *= inv_count;
        for (std::size_t e = 0; e < x.size(); ++e) {
          const double d = x[e] - mu[ids[e]];
          var[ids[e]] += d * d;
        }
        std::vector<double> inv_std(slices);
        for (std::size_t s = 0; s < slices; ++s) {
          inv_std[s] = 1.0 / std::sqrt(var[s] * inv_count + n.eps);
        }
        Tensor xhat(x.shape());
        for (std::size_t e = 0; e < x.size(); ++e) xhat[e] = (x[e] - mu[ids[e]]) * inv_std[ids[e]];

        Tensor dgamma(gamma.shape()), dbeta(gamma.shape());
        std::vector<double> mean_d(slices, 0.0), mean_dx(slices, 0.0);
        for (std::size_t e = 0; e < x.size(); ++e) {
          const std::size_t s = ids[e];
          dgamma[s] += g[e] * xhat[e];
          dbeta[s] += g[e];
          const double d = g[e] * gamma[s];
          mean_d[s] += d;
          mean_dx[s] += d * xhat[e];
        }
        for (std::size_t s = 0; s < slices; ++s) {
          mean_d[s] *= inv_count;
          mean_dx[s] *= inv_count;
        }
        Tensor dx(x.shape());
        for (std::size_t e = 0; e < x.size(); ++e) {
          const std::size_t s = ids[e];
          dx[e] = inv_std[s] * (g[e] * gamma[s] - mean_d[s] - xhat[e] * mean_dx[s]);
        }
        send(0, dx);
        send(1, dgamma);
        send(2, dbeta);
        break;
      }
      case Op::kSignedSqrt: {
        // d/dz sign(z) sqrt|z| = 1 / (2 sqrt|z|); infinite at 0.
        const Tensor& z = in(0);
        Tensor dz(z.shape());
        for (std::size_t e = 0; e < z.size(); ++e) {
          dz[e] = g[e] / (2.0 * std::sqrt(std::abs(z[e])));
        }
        send(0, dz);
        break;
      }
      case Op::kTopkMask: {
        const Tensor& y = val[i];
        Tensor dx(y.shape());
        for (std::size_t e = 0; e < y.size(); ++e) dx[e] = std::isinf(y[e]) ? 0.0 : g[e];
        send(0, dx);
        break;
      }
      case Op::kSum: send(0, Tensor(in(0).shape(), g[0])); break;
      case Op::kMean:
        send(0, Tensor(in(0).shape(), g[0] / static_cast<double>(in(0).size())));
        break;
      case Op::kSlice0: {
        const Tensor& x = in(0);
        Tensor dx(x.shape());
        const std::size_t inner = x.size() / x.dim(0);
        for (std::size_t e = 0; e < g.size(); ++e) dx[n.begin * inner + e] = g[e];
        send(0, dx);
        break;
      }
      case Op::kConcat0: {
        std::size_t offset = 0;
        for (std::size_t j = 0; j < n.inputs.size(); ++j) {
          const Shape& s = in(j).shape();
          send(j, g.slice0(offset, offset + s[0]));
          offset += s[0];
        }
        break;
      }
      case Op::kReshape: send(0, g.reshaped(in(0).shape())); break;
      case Op::kRelu:
        throw UnsupportedPrimitive("graph: no reverse rule for " + describe(Var{i}));
    }
    for (auto j : n.inputs) {
      if (grad[j] && !all_finite(*grad[j])) {
        throw NumericError("graph: non-finite gradient produced by " + describe(Var{i}));
      }
    }
  }

  Bindings result;
  for (const auto& [name, id] : leaves_) {
    result[name] = grad[id] ? *grad[id] : Tensor(val[id].shape());
  }
  return result;
}

}  // namespace hsdssa
