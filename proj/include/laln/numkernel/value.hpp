// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "laln/numkernel/array.hpp"

namespace laln::nk {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the define-by-run tape. backward_fn reads this node's grad
// and accumulates into the grads of its parents.
struct Node {
  Array value;
  Array grad;
  bool grad_ready = false;
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;

  // Lazily allocated, zero-initialised gradient buffer.
  Array& grad_buffer();
};

/// Handle to a tape node. Copies share the node.
class Value {
 public:
  Value() = default;
  explicit Value(NodePtr node) : node_(std::move(node)) {}

  const Array& array() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  double item() const { return node_->value.item(); }
  double operator[](std::size_t i) const { return node_->value[i]; }
  bool requires_grad() const { return node_->requires_grad; }
  bool valid() const { return static_cast<bool>(node_); }

  // Gradient accumulated by backward(); zeros if none reached this node.
  Array grad() const;

  Node& node() const { return *node_; }
  const NodePtr& ptr() const { return node_; }

 private:
  NodePtr node_;
};

Value constant(Array a);
Value parameter(Array a);

/// Records an operation result. If no parent requires a gradient the
/// backward closure is dropped and the result is a constant.
Value make_result(Array out, std::vector<Value> parents, std::function<void(Node&)> backward_fn, const char* op);

/// Reverse-mode sweep from a scalar loss. Intermediate gradients are reset
/// on every call; leaf gradients accumulate across calls.
void backward(const Value& loss);

/// Zeroes the gradients of every leaf reachable from root.
void zero_grad(const Value& root);

}  // namespace laln::nk
