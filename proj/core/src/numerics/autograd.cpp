#include "ciat/numerics/autograd.hpp"

#include <unordered_set>

namespace ciat {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T>& Node<T>::grad_buffer() {
  if (grad.empty()) grad = Tensor<T>(value.shape());
  return grad;
}

template <typename T>
void Node<T>::accumulate(const Tensor<T>& g) {
  if (g.numel() != value.numel()) {
    throw ShapeError("gradient of shape " + shape_str(g.shape()) + " for value of shape " +
                     shape_str(value.shape()));
  }
  if (grad.empty()) {
    grad = Tensor<T>(value.shape(), std::vector<T>(g.data().begin(), g.data().end()));
    return;
  }
  T* dst = grad.raw();
  const T* src = g.raw();
  for (std::size_t i = 0, n = g.numel(); i < n; ++i) dst[i] += src[i];
}

template <typename T>
Var<T>::Var(Tensor<T> value, bool requires_grad) : node_(std::make_shared<Node<T>>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename T>
void Var<T>::set_requires_grad(bool on) {
  if (!node_->is_leaf) throw Error("requires_grad can only be toggled on leaf tensors");
  node_->requires_grad = on;
  if (!on) node_->grad = Tensor<T>();
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->is_leaf = false;
  bool any = false;
  if (g_grad_enabled)
    for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node_ptr());
    node->backward_fn = std::move(fn);
  }
  return Var<T>(std::move(node));
}

namespace {

// Iterative post-order DFS so deep graphs cannot overflow the stack.
template <typename T>
std::vector<Node<T>*> topo_order(Node<T>* root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

template <typename T>
void backward(const Var<T>& loss) {
  if (!loss.defined()) throw Error("backward on undefined tensor");
  if (loss.value().numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw Error("backward: loss does not depend on any trainable tensor");
  }
  Node<T>* root = loss.node();
  auto order = topo_order(root);
  root->accumulate(Tensor<T>(root->value.shape(), T{1}));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->is_leaf || !node->backward_fn || !node->has_grad()) continue;
    node->backward_fn(*node);
  }
  // Interior gradients are only needed during the sweep.
  for (Node<T>* node : order) {
    if (!node->is_leaf) node->grad = Tensor<T>();
  }
}

template <typename T>
std::vector<Node<T>*> gradient_leaves(const Var<T>& loss) {
  std::vector<Node<T>*> leaves;
  if (!loss.requires_grad()) return leaves;
  for (Node<T>* node : topo_order(loss.node())) {
    if (node->is_leaf && node->has_grad()) leaves.push_back(node);
  }
  return leaves;
}

template struct Node<float>;
template struct Node<double>;
template class Var<float>;
template class Var<double>;
template Var<float> make_op(Tensor<float>, std::vector<Var<float>>, std::function<void(Node<float>&)>);
template Var<double> make_op(Tensor<double>, std::vector<Var<double>>, std::function<void(Node<double>&)>);
template void backward(const Var<float>&);
template void backward(const Var<double>&);
template std::vector<Node<float>*> gradient_leaves(const Var<float>&);
template std::vector<Node<double>*> gradient_leaves(const Var<double>&);

}  // namespace ciat
