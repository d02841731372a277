#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "flexhdr/tensor.hpp"

namespace flexhdr {

// Index of a value recorded on a Tape.
using VarId = int;

// Reverse-mode tape. Operations append nodes in evaluation order; backward()
// runs one reverse sweep over the recorded nodes, so every op's adjoint runs
// exactly once. Gradients are allocated lazily: a node that never receives an
// adjoint keeps an empty gradient, and named_grads() reports it as exact zero.
template <typename T>
class Tape {
 public:
  // Adjoint callback: reads grad(self), accumulates into the inputs' grads.
  using BackwardFn = std::function<void(Tape<T>&, VarId self)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;          // empty until an adjoint arrives
    BackwardFn backward;     // empty for leaves
    std::string param_name;  // nonempty for named parameters
  };

  VarId constant(Tensor<T> v) { return push(std::move(v), {}, {}); }

  VarId param(Tensor<T> v, std::string name) { return push(std::move(v), {}, std::move(name)); }

  VarId record(Tensor<T> v, BackwardFn backward) { return push(std::move(v), std::move(backward), {}); }

  const Tensor<T>& value(VarId id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Shape& shape(VarId id) const { return value(id).shape(); }

  bool has_grad(VarId id) const { return nodes_[static_cast<size_t>(id)].grad.numel() > 0; }

  // Gradient accumulator, zero-initialised on first touch.
  Tensor<T>& grad(VarId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.numel() == 0) n.grad = Tensor<T>::zeros(n.value.shape());
    return n.grad;
  }

  // Seeds d(root)/d(root) = 1 and sweeps the tape once in reverse order.
  // root must hold exactly one element.
  void backward(VarId root) {
    if (value(root).numel() != 1)
      throw std::invalid_argument("backward: root must be a scalar, got " + shape(root).str());
    grad(root)[0] = T(1);
    for (VarId i = root; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.backward && n.grad.numel() > 0) n.backward(*this, i);
    }
  }

  // Gradients of all named parameters; parameters the sweep never reached
  // report exact zeros.
  std::map<std::string, Tensor<T>> named_grads() const {
    std::map<std::string, Tensor<T>> out;
    for (const Node& n : nodes_) {
      if (n.param_name.empty()) continue;
      out[n.param_name] = n.grad.numel() > 0 ? n.grad : Tensor<T>::zeros(n.value.shape());
    }
    return out;
  }

  size_t size() const { return nodes_.size(); }

 private:
  VarId push(Tensor<T> v, BackwardFn bw, std::string name) {
    nodes_.push_back(Node{std::move(v), {}, std::move(bw), std::move(name)});
    return static_cast<VarId>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
};

}  // namespace flexhdr
