// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cxrgan/array.h"

namespace cxrgan {

namespace detail {
struct Node;
}

/// Handle onto a node of the computation graph.
///
/// Copies share the node. A tensor created directly from an Array is a leaf;
/// tensors returned by ops record their inputs and a backward rule while
/// gradient recording is enabled and at least one input requires a gradient.
/// Backward rules are themselves written with differentiable ops, so a
/// gradient computed with create_graph=true can be differentiated again.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Array value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Array& value() const;
  /// Mutable access for leaves (optimizer updates). Throws on non-leaves.
  Array& mutable_value();
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool is_leaf() const;
  const char* op_name() const;

  /// Gradient accumulated by backward(); leaves only.
  bool has_grad() const;
  const Array& grad() const;
  void zero_grad();

  /// A new leaf sharing no graph history, holding a copy of the value.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend struct detail::Node;
  friend class GraphAccess;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Whether ops currently record graph history (thread-local).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Accumulates d(loss)/d(leaf) into every reachable leaf that requires a
/// gradient. Callers zero gradients between steps. loss must hold exactly one
/// element.
void backward(const Tensor& loss);

/// Gradients of a scalar output with respect to the given tensors, returned
/// rather than accumulated. Inputs the output does not depend on receive
/// zeros. With create_graph the results are differentiable.
std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs,
                         bool create_graph = false);

struct BackwardContext {
  const Tensor& grad_output;
  const Tensor& self;
  const std::vector<Tensor>& inputs;
  const std::vector<bool>& needs;  // which input gradients are wanted
};

using BackwardFn = std::function<std::vector<Tensor>(const BackwardContext&)>;

/// Builds an op result; records history only when it is needed.
Tensor make_op_result(const char* op, Array value, std::vector<Tensor> inputs,
                      BackwardFn backward);

using FirstOrderBackwardFn =
    std::function<std::vector<Array>(const Array& grad_output, const std::vector<Tensor>& inputs)>;

/// An op whose backward rule works on raw arrays. It supports ordinary
/// backward passes; differentiating through its gradient (create_graph)
/// raises UnsupportedOpError naming the op.
Tensor make_first_order_op(const char* op, Array value, std::vector<Tensor> inputs,
                           FirstOrderBackwardFn backward);

}  // namespace cxrgan
