// SPDX-License-Identifier: Apache-2.0
#include "segzsl/graph.hpp"

#include <cmath>

#include "segzsl/error.hpp"

namespace segzsl {

namespace {
void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    fail(Errc::shape_mismatch, std::string(op) + ": shapes " + shape_str(a) +
                                   " and " + shape_str(b) + " differ");
  }
}
}  // namespace

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  grads_ready_ = false;
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::leaf(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.requires_grad = false;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& va = nodes_[a.id].value;
  const Tensor& vb = nodes_[b.id].value;
  if (va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.rows()) {
    fail(Errc::shape_mismatch, "matmul: shapes " + shape_str(va) + " and " +
                                   shape_str(vb) + " are incompatible");
  }
  Node n;
  n.op = Op::kMatmul;
  n.arity = 2;
  n.in = {a.id, b.id};
  n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  n.value = Tensor({va.rows(), vb.cols()});
  gemm_nn(n.value.data(), va.data(), vb.data(), va.rows(), va.cols(),
          vb.cols(), false);
  return push(std::move(n));
}

Var Graph::add_bias(Var m, Var bias) {
  const Tensor& vm = nodes_[m.id].value;
  const Tensor& vb = nodes_[bias.id].value;
  if (vm.rank() != 2 || vb.rank() != 1 || vm.cols() != vb.numel()) {
    fail(Errc::shape_mismatch, "add_bias: shapes " + shape_str(vm) + " and " +
                                   shape_str(vb) + " are incompatible");
  }
  Node n;
  n.op = Op::kAddBias;
  n.arity = 2;
  n.in = {m.id, bias.id};
  n.requires_grad = nodes_[m.id].requires_grad || nodes_[bias.id].requires_grad;
  n.value = vm;
  const std::size_t c = vm.cols();
  for (std::size_t r = 0; r < vm.rows(); ++r) {
    double* row = n.value.data().data() + r * c;
    for (std::size_t j = 0; j < c; ++j) row[j] += vb[j];
  }
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  const Tensor& va = nodes_[a.id].value;
  const Tensor& vb = nodes_[b.id].value;
  check_same_shape("add", va, vb);
  Node n;
  n.op = Op::kAdd;
  n.arity = 2;
  n.in = {a.id, b.id};
  n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  n.value = va;
  for (std::size_t i = 0; i < vb.numel(); ++i) n.value[i] += vb[i];
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  const Tensor& va = nodes_[a.id].value;
  const Tensor& vb = nodes_[b.id].value;
  check_same_shape("sub", va, vb);
  Node n;
  n.op = Op::kSub;
  n.arity = 2;
  n.in = {a.id, b.id};
  n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  n.value = va;
  for (std::size_t i = 0; i < vb.numel(); ++i) n.value[i] -= vb[i];
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& va = nodes_[a.id].value;
  const Tensor& vb = nodes_[b.id].value;
  check_same_shape("mul", va, vb);
  Node n;
  n.op = Op::kMul;
  n.arity = 2;
  n.in = {a.id, b.id};
  n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  n.value = va;
  for (std::size_t i = 0; i < vb.numel(); ++i) n.value[i] *= vb[i];
  return push(std::move(n));
}

Var Graph::scale(Var a, double c) {
  Node n;
  n.op = Op::kScale;
  n.arity = 1;
  n.in = {a.id, 0};
  n.c0 = c;
  n.requires_grad = nodes_[a.id].requires_grad;
  n.value = nodes_[a.id].value;
  for (std::size_t i = 0; i < n.value.numel(); ++i) n.value[i] *= c;
  return push(std::move(n));
}

Var Graph::add_scalar(Var a, double c) {
  Node n;
  n.op = Op::kAddScalar;
  n.arity = 1;
  n.in = {a.id, 0};
  n.c0 = c;
  n.requires_grad = nodes_[a.id].requires_grad;
  n.value = nodes_[a.id].value;
  for (std::size_t i = 0; i < n.value.numel(); ++i) n.value[i] += c;
  return push(std::move(n));
}

Var Graph::relu(Var a) {
  Node n;
  n.op = Op::kRelu;
  n.arity = 1;
  n.in = {a.id, 0};
  n.requires_grad = nodes_[a.id].requires_grad;
  n.value = nodes_[a.id].value;
  for (std::size_t i = 0; i < n.value.numel(); ++i) {
    if (n.value[i] < 0.0) n.value[i] = 0.0;
  }
  return push(std::move(n));
}

Var Graph::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.arity = 1;
  n.in = {a.id, 0};
  n.requires_grad = nodes_[a.id].requires_grad;
  n.value = nodes_[a.id].value;
  for (std::size_t i = 0; i < n.value.numel(); ++i)
    n.value[i] = std::tanh(n.value[i]);
  return push(std::move(n));
}

Var Graph::exp(Var a) {
  Node n;
  n.op = Op::kExp;
  n.arity = 1;
  n.in = {a.id, 0};
  n.requires_grad = nodes_[a.id].requires_grad;
  n.value = nodes_[a.id].value;
  for (std::size_t i = 0; i < n.value.numel(); ++i)
    n.value[i] = std::exp(n.value[i]);
  return push(std::move(n));
}

Var Graph::square(Var a) {
  Node n;
  n.op = Op::kSquare;
  n.arity = 1;
  n.in = {a.id, 0};
  n.requires_grad = nodes_[a.id].requires_grad;
  n.value = nodes_[a.id].value;
  for (std::size_t i = 0; i < n.value.numel(); ++i)
    n.value[i] = n.value[i] * n.value[i];
  return push(std::move(n));
}

Var Graph::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.arity = 1;
  n.in = {a.id, 0};
  n.requires_grad = nodes_[a.id].requires_grad;
  double acc = 0.0;
  for (double v : nodes_[a.id].value.data()) acc += v;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

Var Graph::mean(Var a) {
  Node n;
  n.op = Op::kMean;
  n.arity = 1;
  n.in = {a.id, 0};
  n.requires_grad = nodes_[a.id].requires_grad;
  const Tensor& va = nodes_[a.id].value;
  double acc = 0.0;
  for (double v : va.data()) acc += v;
  n.value = Tensor::scalar(acc / static_cast<double>(va.numel()));
  return push(std::move(n));
}

Var Graph::concat(Var a, Var b) {
  const Tensor& va = nodes_[a.id].value;
  const Tensor& vb = nodes_[b.id].value;
  Node n;
  n.op = Op::kConcat;
  n.arity = 2;
  n.in = {a.id, b.id};
  n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
  if (va.rank() == 1 && vb.rank() == 1) {
    const std::size_t total = va.numel() + vb.numel();
    std::vector<double> out(total);
    std::copy(va.data().begin(), va.data().end(), out.begin());
    std::copy(vb.data().begin(), vb.data().end(), out.begin() + va.numel());
    n.value = Tensor({total}, std::move(out));
  } else if (va.rank() == 2 && vb.rank() == 2 && va.rows() == vb.rows()) {
    const std::size_t rows = va.rows();
    const std::size_t ca = va.cols();
    const std::size_t cb = vb.cols();
    Tensor out({rows, ca + cb});
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < ca; ++j) out.at(r, j) = va.at(r, j);
      for (std::size_t j = 0; j < cb; ++j) out.at(r, ca + j) = vb.at(r, j);
    }
    n.value = std::move(out);
  } else {
    fail(Errc::shape_mismatch, "concat: shapes " + shape_str(va) + " and " +
                                   shape_str(vb) + " are incompatible");
  }
  return push(std::move(n));
}

Var Graph::clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) fail(Errc::invalid_argument, "clamp: lo must be <= hi");
  Node n;
  n.op = Op::kClamp;
  n.arity = 1;
  n.in = {a.id, 0};
  n.c0 = lo;
  n.c1 = hi;
  n.requires_grad = nodes_[a.id].requires_grad;
  n.value = nodes_[a.id].value;
  for (std::size_t i = 0; i < n.value.numel(); ++i) {
    if (n.value[i] < lo) n.value[i] = lo;
    if (n.value[i] > hi) n.value[i] = hi;
  }
  return push(std::move(n));
}

Var Graph::stop_grad(Var a) {
  Node n;
  n.op = Op::kStopGrad;
  n.arity = 1;
  n.in = {a.id, 0};
  n.requires_grad = false;
  n.value = nodes_[a.id].value;
  return push(std::move(n));
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (grads_ready_ && n.requires_grad && n.grad.numel() == n.value.numel() &&
      n.grad.same_shape(n.value)) {
    return n.grad;
  }
  return Tensor::zeros_like(n.value);
}

void Graph::backward(Var scalar_output) {
  Node& out = nodes_[scalar_output.id];
  if (out.value.numel() != 1) {
    fail(Errc::shape_mismatch,
         "backward: output has shape " + shape_str(out.value) +
             ", expected a scalar");
  }
  // Reset every gradient buffer so repeated calls stay consistent.
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad = Tensor::zeros_like(n.value);
    } else {
      n.grad = Tensor();
    }
  }
  if (out.requires_grad) {
    out.grad[0] = 1.0;
    for (std::uint32_t id = scalar_output.id + 1; id-- > 0;) {
      if (nodes_[id].requires_grad && nodes_[id].arity > 0) backprop_node(id);
    }
  }
  grads_ready_ = true;
}

void Graph::backprop_node(std::uint32_t id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  auto in_grad = [&](int slot) -> Tensor& { return nodes_[n.in[slot]].grad; };
  auto in_requires = [&](int slot) {
    return nodes_[n.in[slot]].requires_grad;
  };
  auto in_value = [&](int slot) -> const Tensor& {
    return nodes_[n.in[slot]].value;
  };

  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
    case Op::kStopGrad:
      break;
    case Op::kMatmul: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      if (in_requires(0)) {
        // dA += dC * B^T
        gemm_nt(in_grad(0).data(), g.data(), b.data(), a.rows(), b.cols(),
                a.cols(), true);
      }
      if (in_requires(1)) {
        // dB += A^T * dC
        gemm_tn(in_grad(1).data(), a.data(), g.data(), a.cols(), a.rows(),
                b.cols(), true);
      }
      break;
    }
    case Op::kAddBias: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
      }
      if (in_requires(1)) {
        Tensor& gb = in_grad(1);
        const std::size_t c = in_value(0).cols();
        for (std::size_t r = 0; r < in_value(0).rows(); ++r) {
          const double* row = g.data().data() + r * c;
          for (std::size_t j = 0; j < c; ++j) gb[j] += row[j];
        }
      }
      break;
    }
    case Op::kAdd: {
      for (int slot = 0; slot < 2; ++slot) {
        if (!in_requires(slot)) continue;
        Tensor& gi = in_grad(slot);
        for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += g[i];
      }
      break;
    }
    case Op::kSub: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
      }
      if (in_requires(1)) {
        Tensor& gb = in_grad(1);
        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
      }
      break;
    }
    case Op::kMul: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        const Tensor& b = in_value(1);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * b[i];
      }
      if (in_requires(1)) {
        Tensor& gb = in_grad(1);
        const Tensor& a = in_value(0);
        for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * a[i];
      }
      break;
    }
    case Op::kScale: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * n.c0;
      }
      break;
    }
    case Op::kAddScalar: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
      }
      break;
    }
    case Op::kRelu: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        const Tensor& a = in_value(0);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          if (a[i] > 0.0) ga[i] += g[i];
        }
      }
      break;
    }
    case Op::kTanh: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
        }
      }
      break;
    }
    case Op::kExp: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * n.value[i];
      }
      break;
    }
    case Op::kSquare: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        const Tensor& a = in_value(0);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += 2.0 * g[i] * a[i];
      }
      break;
    }
    case Op::kSum: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        const double gv = g[0];
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gv;
      }
      break;
    }
    case Op::kMean: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        const double gv = g[0] / static_cast<double>(ga.numel());
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += gv;
      }
      break;
    }
    case Op::kConcat: {
      const Tensor& a = in_value(0);
      const Tensor& b = in_value(1);
      if (a.rank() == 1) {
        if (in_requires(0)) {
          Tensor& ga = in_grad(0);
          for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += g[i];
        }
        if (in_requires(1)) {
          Tensor& gb = in_grad(1);
          for (std::size_t i = 0; i < b.numel(); ++i) gb[i] += g[a.numel() + i];
        }
      } else {
        const std::size_t ca = a.cols();
        const std::size_t cb = b.cols();
        for (std::size_t r = 0; r < a.rows(); ++r) {
          const double* grow = g.data().data() + r * (ca + cb);
          if (in_requires(0)) {
            double* garow = in_grad(0).data().data() + r * ca;
            for (std::size_t j = 0; j < ca; ++j) garow[j] += grow[j];
          }
          if (in_requires(1)) {
            double* gbrow = in_grad(1).data().data() + r * cb;
            for (std::size_t j = 0; j < cb; ++j) gbrow[j] += grow[ca + j];
          }
        }
      }
      break;
    }
    case Op::kClamp: {
      if (in_requires(0)) {
        Tensor& ga = in_grad(0);
        const Tensor& a = in_value(0);
        for (std::size_t i = 0; i < g.numel(); ++i) {
          if (a[i] > n.c0 && a[i] < n.c1) ga[i] += g[i];
        }
      }
      break;
    }
  }
}

}  // namespace segzsl
