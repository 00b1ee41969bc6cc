#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ciat/numerics/tensor.hpp"

namespace ciat {

template <typename T>
struct Node;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

// One vertex of the recorded computation graph. Leaves hold parameters or
// constants; interior nodes hold an op result plus the closure that pushes
// the output gradient into the inputs.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<NodePtr<T>> inputs;
  std::function<void(Node&)> backward_fn;

  bool has_grad() const noexcept { return !grad.empty(); }

  // Adds g into this node's gradient, allocating it on first use.
  void accumulate(const Tensor<T>& g);
  Tensor<T>& grad_buffer();
};

// Handle to a graph node. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false);
  explicit Var(NodePtr<T> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->has_grad(); }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  void zero_grad() { node_->grad = Tensor<T>(); }

  Node<T>* node() const noexcept { return node_.get(); }
  const NodePtr<T>& node_ptr() const noexcept { return node_; }

 private:
  NodePtr<T> node_;
};

// Graph recording switch for the current thread.
bool grad_enabled() noexcept;

// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an op result. When no input requires a gradient the node is
// recorded as a constant and the closure is dropped.
template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> fn);

// Reverse sweep from a scalar loss. Each recorded node is visited exactly
// once in reverse topological order; leaf gradients accumulate.
template <typename T>
void backward(const Var<T>& loss);

// Leaves reachable from `loss` that received a gradient, in visit order.
template <typename T>
std::vector<Node<T>*> gradient_leaves(const Var<T>& loss);

extern template struct Node<float>;
extern template struct Node<double>;
extern template class Var<float>;
extern template class Var<double>;

}  // namespace ciat
