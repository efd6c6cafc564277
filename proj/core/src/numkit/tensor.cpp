#include "rrg/numkit/tensor.hpp"

#include <unordered_set>

namespace rrg::numkit {

void Node::accumulate(std::span<const double> delta) {
  auto g = grad_buffer();
  if (delta.size() != g.size()) {
    throw ShapeError("backward: gradient size mismatch");
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

std::span<double> Node::grad_buffer() {
  if (!grad.same_shape(value)) grad = Array(value.shape(), 0.0);
  return grad.data();
}

Tensor Tensor::leaf(Array value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::make(Array value, std::vector<Tensor> parents, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Array Tensor::grad() const {
  if (node_->grad.same_shape(node_->value)) return node_->grad;
  return Array(node_->value.shape(), 0.0);
}

void Tensor::zero_grad() {
  if (node_->grad.same_shape(node_->value)) node_->grad.fill(0.0);
}

void backward(const Tensor& root) {
  if (root.size() != 1) {
    throw ShapeError("backward: root must be a scalar, got " +
                     shape_string(root.shape()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(&root.node(), 0);
  seen.insert(&root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Intermediate gradients start from zero on every pass; leaves accumulate.
  for (Node* n : order) {
    if (n->backward) n->grad = Array(n->value.shape(), 0.0);
  }
  root.node().grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

}  // namespace rrg::numkit
