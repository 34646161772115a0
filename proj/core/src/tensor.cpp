// Copyright 2026 The cxrgan Authors
// SPDX-License-Identifier: Apache-2.0

#include "cxrgan/tensor.h"

#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "cxrgan/error.h"
#include "cxrgan/ops.h"

namespace cxrgan {

namespace detail {

struct Node {
  Array value;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Tensor> inputs;
  BackwardFn backward;
  std::optional<Array> grad;

  bool is_leaf() const { return !backward; }
};

}  // namespace detail

using detail::Node;

class GraphAccess {
 public:
  static Node* node(const Tensor& t) { return t.node_.get(); }
  static const std::shared_ptr<Node>& shared(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
};

namespace {

thread_local bool g_grad_enabled = true;

Node& checked(const std::shared_ptr<Node>& n) {
  if (!n) throw Error("use of undefined tensor");
  return *n;
}

}  // namespace

Tensor::Tensor(Array value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

const Array& Tensor::value() const { return checked(node_).value; }

Array& Tensor::mutable_value() {
  Node& n = checked(node_);
  if (!n.is_leaf()) throw Error("mutable_value() on non-leaf tensor produced by " + std::string(n.op));
  return n.value;
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool on) {
  Node& n = checked(node_);
  if (!n.is_leaf()) throw Error("set_requires_grad() on non-leaf tensor");
  n.requires_grad = on;
}

bool Tensor::is_leaf() const { return checked(node_).is_leaf(); }
const char* Tensor::op_name() const { return checked(node_).op; }
bool Tensor::has_grad() const { return checked(node_).grad.has_value(); }

const Array& Tensor::grad() const {
  const Node& n = checked(node_);
  if (!n.grad) throw Error("tensor has no accumulated gradient");
  return *n.grad;
}

void Tensor::zero_grad() { checked(node_).grad.reset(); }

Tensor Tensor::detach() const { return Tensor(value(), false); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_op_result(const char* op, Array value, std::vector<Tensor> inputs, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  bool track = false;
  if (g_grad_enabled) {
    for (const Tensor& in : inputs) track = track || (in.defined() && in.requires_grad());
  }
  if (track) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return GraphAccess::wrap(std::move(node));
}

Tensor make_first_order_op(const char* op, Array value, std::vector<Tensor> inputs,
                           FirstOrderBackwardFn backward) {
  return make_op_result(op, std::move(value), std::move(inputs),
                        [op, fn = std::move(backward)](const BackwardContext& c) {
                          if (g_grad_enabled) {
                            throw UnsupportedOpError(op, "no second-order derivative is available");
                          }
                          std::vector<Tensor> out;
                          for (Array& a : fn(c.grad_output.value(), c.inputs)) out.emplace_back(std::move(a));
                          return out;
                        });
}

namespace {

class GradModeScope {
 public:
  explicit GradModeScope(bool on) : previous_(g_grad_enabled) { g_grad_enabled = on; }
  ~GradModeScope() { g_grad_enabled = previous_; }

 private:
  bool previous_;
};

// Post-order over the part of the graph that records history.
std::vector<std::shared_ptr<Node>> topological_order(const std::shared_ptr<Node>& root) {
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto& child = GraphAccess::shared(node->inputs[next++]);
      if (child && child->requires_grad && visited.insert(child.get()).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }
  return order;
}

using GradMap = std::unordered_map<Node*, Tensor>;

// Runs the reverse sweep. `is_target` marks nodes whose gradient the caller
// wants; only nodes with a path to a target are expanded.
GradMap reverse_sweep(const Tensor& output, const std::function<bool(Node*)>& is_target,
                      bool create_graph) {
  if (output.size() != 1) {
    throw ShapeError("backward requires a scalar output, got shape " + to_string(output.shape()));
  }
  GradMap grads;
  if (!output.requires_grad()) return grads;

  const auto order = topological_order(GraphAccess::shared(output));
  std::unordered_map<Node*, bool> needed;
  needed.reserve(order.size());
  for (const auto& node : order) {
    bool n = is_target(node.get());
    for (const Tensor& in : node->inputs) {
      auto it = needed.find(GraphAccess::node(in));
      if (it != needed.end() && it->second) n = true;
    }
    needed[node.get()] = n;
  }

  GradModeScope mode(create_graph);
  grads[GraphAccess::node(output)] = Tensor(Array(output.shape(), 1.0));

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = it->get();
    if (node->is_leaf() || !needed[node]) continue;
    auto git = grads.find(node);
    if (git == grads.end()) continue;

    std::vector<bool> needs(node->inputs.size(), false);
    bool any = false;
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      Node* in = GraphAccess::node(node->inputs[i]);
      if (in && in->requires_grad) {
        auto nit = needed.find(in);
        needs[i] = nit != needed.end() && nit->second;
        any = any || needs[i];
      }
    }
    if (!any) continue;

    const Tensor grad_out = git->second;
    const Tensor self = GraphAccess::wrap(*it);
    // The gradient of this node is no longer needed once propagated.
    if (!is_target(node)) grads.erase(git);
    auto input_grads = node->backward(BackwardContext{grad_out, self, node->inputs, needs});

    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      if (!needs[i] || i >= input_grads.size() || !input_grads[i].defined()) continue;
      const Tensor& in = node->inputs[i];
      if (input_grads[i].shape() != in.shape()) {
        throw ShapeError(std::string("backward of ") + node->op + " produced gradient of shape " +
                         to_string(input_grads[i].shape()) + " for input of shape " +
                         to_string(in.shape()));
      }
      auto [slot, inserted] = grads.try_emplace(GraphAccess::node(in), input_grads[i]);
      if (!inserted) slot->second = add(slot->second, input_grads[i]);
    }
  }
  return grads;
}

}  // namespace

void backward(const Tensor& loss) {
  auto grads = reverse_sweep(
      loss, [](Node* n) { return n->is_leaf() && n->requires_grad; }, false);
  for (auto& [node, g] : grads) {
    if (!node->is_leaf() || !node->requires_grad) continue;
    if (!node->grad) {
      node->grad = g.value();
    } else {
      auto& acc = node->grad->storage();
      const auto& add_v = g.value().storage();
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += add_v[i];
    }
  }
}

std::vector<Tensor> grad(const Tensor& output, const std::vector<Tensor>& inputs, bool create_graph) {
  std::unordered_set<Node*> targets;
  for (const Tensor& in : inputs) targets.insert(GraphAccess::node(in));
  auto grads = reverse_sweep(output, [&](Node* n) { return targets.count(n) > 0; }, create_graph);
  std::vector<Tensor> result;
  result.reserve(inputs.size());
  for (const Tensor& in : inputs) {
    auto it = grads.find(GraphAccess::node(in));
    result.push_back(it != grads.end() ? it->second : Tensor(Array(in.shape(), 0.0)));
  }
  return result;
}

}  // namespace cxrgan
