// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "segzsl/tensor.hpp"

namespace segzsl {

// Handle into a Graph's node list.
struct Var {
  std::uint32_t id = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, which is a
// topological order by construction; backward() walks them once in reverse.
// All values are eagerly computed at op-insertion time.
//
// Gradient routing: leaves created with constant() and values passed through
// stop_grad() never receive gradient, and backward() skips every node that
// cannot reach a differentiable leaf.
class Graph {
 public:
  Var leaf(Tensor value);      // differentiable input (parameter)
  Var constant(Tensor value);  // non-differentiable input

  // y = a @ b, rank-2 operands with inner dimensions matching.
  Var matmul(Var a, Var b);
  // y = m + bias broadcast over rows; m rank-2 (r x c), bias rank-1 (c).
  Var add_bias(Var m, Var bias);

  Var add(Var a, Var b);  // elementwise, equal shapes
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);

  Var scale(Var a, double c);       // y = c * a
  Var add_scalar(Var a, double c);  // y = a + c elementwise
  Var neg(Var a) { return scale(a, -1.0); }

  Var relu(Var a);  // gradient at 0 is 0
  Var tanh(Var a);
  Var exp(Var a);
  Var square(Var a);

  Var sum(Var a);   // scalar
  Var mean(Var a);  // scalar

  // Concatenate along the last axis: rank-1 with rank-1, or rank-2 with
  // rank-2 and equal row counts.
  Var concat(Var a, Var b);

  // Clamp to [lo, hi]; gradient is identity strictly inside, 0 outside.
  Var clamp(Var a, double lo, double hi);

  Var stop_grad(Var a);

  // Accumulates gradients of `scalar_output` into every reachable
  // differentiable node. Errors unless the output has exactly one element.
  // Idempotent: gradients are reset at each call.
  void backward(Var scalar_output);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }

  // Gradient buffer of v after backward(); zeros if v was not reached or is
  // non-differentiable.
  Tensor grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kConstant,
    kMatmul,
    kAddBias,
    kAdd,
    kSub,
    kMul,
    kScale,
    kAddScalar,
    kRelu,
    kTanh,
    kExp,
    kSquare,
    kSum,
    kMean,
    kConcat,
    kClamp,
    kStopGrad,
  };

  struct Node {
    Op op;
    std::uint8_t arity = 0;
    bool requires_grad = false;
    std::array<std::uint32_t, 2> in{};
    double c0 = 0.0;  // scale factor / added constant / clamp lo
    double c1 = 0.0;  // clamp hi
    Tensor value;
    Tensor grad;
  };

  Var push(Node node);
  void backprop_node(std::uint32_t id);

  std::vector<Node> nodes_;
  bool grads_ready_ = false;
};

}  // namespace segzsl
