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
#include <map>
#include <string>
#include <vector>

#include "hsdssa/tensor.hpp"

namespace hsdssa {

/// Handle to a node of a Graph. Only meaningful for the graph that made it.
struct Var {
  std::size_t id = 0;
};

using Bindings = std::map<std::string, Tensor>;

/// A tape of tensor primitives ending in a single scalar. Nodes are appended
/// in construction order, so operands always precede their users and the
/// graph is acyclic by construction. Leaves are bound by name at evaluation
/// time; constants are baked in and receive no gradient.
class Graph {
 public:
  enum class Op {
    kLeaf,
    kConstant,
    kMatmul,
    kTranspose,
    kAdd,
    kSub,
    kMul,
    kScale,
    kConv,
    kSoftmaxRows,
    kLayerNorm,
    kSignedSqrt,
    kTopkMask,
    kRelu,
    kSum,
    kMean,
    kSlice0,
    kConcat0,
    kReshape,
  };

  Var leaf(const std::string& name);
  Var constant(Tensor value);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double alpha);
  Var conv(Var x, Var w, ConvParams params);
  Var softmax_rows(Var a);
  Var layer_norm(Var x, std::vector<std::size_t> axes, Var gamma, Var beta, double eps);
  Var signed_sqrt(Var a);
  Var topk_mask(Var a, std::size_t k);
  Var relu(Var a);
  Var sum(Var a);
  Var mean(Var a);
  Var slice0(Var a, std::size_t begin, std::size_t end);
  Var concat0(const std::vector<Var>& parts);
  Var reshape(Var a, Shape shape);

  void set_output(Var v);
  Var output() const;

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::vector<std::string> leaf_names() const;
  Op op(Var v) const { return nodes_.at(v.id).op; }
  std::vector<Var> operands(Var v) const;
  std::string describe(Var v) const;

  /// Values of every node, in node order.
  std::vector<Tensor> forward(const Bindings& leaves) const;

  /// Value of the scalar output.
  double evaluate(const Bindings& leaves) const;

  /// d(output)/d(leaf) for every leaf, by reverse accumulation.
  Bindings gradient(const Bindings& leaves) const;

 private:
  struct Node {
    Op op = Op::kConstant;
    std::vector<std::size_t> inputs;
    std::string name;  // leaves only
    Tensor value;      // constants only
    double alpha = 0.0;
    double eps = 0.0;
    std::size_t k = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    ConvParams conv;
    std::vector<std::size_t> axes;
    Shape shape;
  };

  static Node make_node(Op op, std::vector<std::size_t> inputs = {});
  Var push(Node node);
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> leaves_;
  std::size_t output_ = 0;
  bool has_output_ = false;
};

const char* op_name(Graph::Op op);

}  // namespace hsdssa
