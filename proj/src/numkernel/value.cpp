// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/numkernel/value.hpp"

#include <unordered_set>

#include "laln/error.hpp"

namespace laln::nk {

Array& Node::grad_buffer() {
  if (!grad_ready) {
    grad = Array::zeros_like(value);
    grad_ready = true;
  }
  return grad;
}

Array Value::grad() const {
  if (node_->grad_ready) return node_->grad;
  return Array::zeros_like(node_->value);
}

Value constant(Array a) {
  auto n = std::make_shared<Node>();
  n->value = std::move(a);
  return Value(std::move(n));
}

Value parameter(Array a) {
  auto n = std::make_shared<Node>();
  n->value = std::move(a);
  n->requires_grad = true;
  return Value(std::move(n));
}

Value make_result(Array out, std::vector<Value> parents, std::function<void(Node&)> backward_fn, const char* op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(out);
  n->is_leaf = false;
  n->op = op;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.ptr());
    n->backward_fn = std::move(backward_fn);
  }
  return Value(std::move(n));
}

namespace {

// Post-order over nodes that require gradients, iterative to survive long
// recurrent chains.
std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* child = node->parents[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

void backward(const Value& loss) {
  if (!loss.valid()) throw ContractError("backward: empty value");
  if (loss.shape().size() != 0) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  Node* root = &loss.node();
  if (!root->requires_grad) return;
  auto order = topo_order(root);
  for (Node* n : order) {
    if (!n->is_leaf) {
      n->grad_ready = false;
      n->grad = Array();
    }
  }
  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf && n->backward_fn && n->grad_ready) n->backward_fn(*n);
  }
}

void zero_grad(const Value& root) {
  if (!root.valid() || !root.requires_grad()) return;
  for (Node* n : topo_order(&root.node())) {
    if (n->grad_ready) n->grad.fill(0.0);
  }
}

}  // namespace laln::nk
