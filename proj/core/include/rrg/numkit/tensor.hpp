#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "rrg/numkit/array.hpp"

namespace rrg::numkit {

struct Node;

/// Propagates `self.grad` into the gradients of `self.parents`.
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Array value;
  Array grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  /// Adds `delta` (same element count as value) into grad.
  void accumulate(std::span<const double> delta);
  /// Lazily allocated gradient buffer, zero-initialised.
  std::span<double> grad_buffer();
};

/// Handle to a node of the reverse-mode graph. Copies share the node.
///
/// A tensor records its producers only when at least one input requires a
/// gradient, so inference over non-differentiable leaves builds no graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Array value, bool requires_grad);
  static Tensor constant(Array value) { return leaf(std::move(value), false); }

  /// Builds an op node. `backward` is dropped when no parent needs a gradient.
  static Tensor make(Array value, std::vector<Tensor> parents, BackwardFn backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Array& value() const { return node_->value; }
  Array& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  std::size_t size() const { return node_->value.size(); }
  double item() const { return node_->value.item(); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  /// Gradient accumulated so far; zeros if nothing has flowed in.
  Array grad() const;
  void zero_grad();

  /// Same value, cut from the graph.
  Tensor detach() const { return constant(node_->value); }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Reverse pass from a scalar root: seeds d(root)/d(root) = 1 and accumulates
/// into every reachable node that requires a gradient. Leaf gradients add up
/// across calls until zeroed.
void backward(const Tensor& root);

}  // namespace rrg::numkit
