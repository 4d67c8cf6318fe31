// Tape-based reverse-mode differentiation over Tensor values.
#pragma once

#include "rgbdsal/nn/tensor.hpp"

#include <functional>
#include <vector>

namespace rgbdsal::nn {

/// Records every operation of one forward pass. Nodes are appended in
/// topological order, so backward() is a single reverse sweep.
///
/// A non-recording graph keeps the values but drops all backward closures;
/// it is what inference uses.
template <typename T>
class Graph {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };
  using Backward = std::function<void(Graph&, int)>;

  explicit Graph(bool record = true) : record_(record) {}

  bool recording() const { return record_; }

  Var leaf(Tensor<T> value) { return push(std::move(value), nullptr, false); }

  /// Appends a node; `backward` is kept only when recording and when some
  /// input (or parameter) actually needs a gradient.
  Var push(Tensor<T> value, Backward backward, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = record_ && requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor<T>& value(int id) const { return nodes_[id].value; }
  T scalar(Var v) const { return value(v).data(0, 0); }

  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  /// Gradient accumulator for node `id`, allocated on first use.
  DenseMatrix<T>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = DenseMatrix<T>::Zero(n.value.data.rows(), n.value.data.cols());
    return n.grad;
  }
  bool has_grad(int id) const { return nodes_[id].grad.size() != 0; }

  /// Seeds d(loss)/d(loss) = seed and propagates to all parameters.
  void backward(Var loss, T seed = T(1)) {
    if (!record_) throw_invariant("backward() on a non-recording graph");
    if (value(loss).data.size() != 1) throw_invariant("backward() needs a scalar");
    if (!nodes_[loss.id].requires_grad) return;
    grad(loss.id).setConstant(seed);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.backward && n.grad.size() != 0) n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    DenseMatrix<T> grad;
    Backward backward;
    bool requires_grad = false;
  };

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace rgbdsal::nn
