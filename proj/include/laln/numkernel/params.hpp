// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "laln/numkernel/archive.hpp"
#include "laln/numkernel/value.hpp"

namespace laln::nk {

struct Param {
  std::string name;
  Array value;
};

using ParamPtr = std::shared_ptr<Param>;
using Gradients = NamedArrays;

/// Ordered collection of named parameter arrays. A store may reference a
/// Param owned jointly with another store (shared embedding tables).
class ParamStore {
 public:
  Param& add(const std::string& name, Shape shape);
  void share(const ParamPtr& p);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  const ParamPtr& ptr(const std::string& name) const;
  const std::vector<ParamPtr>& params() const { return params_; }
  std::size_t total_size() const;

  NamedArrays to_named() const;
  // Every parameter must be present with a matching shape.
  void load_named(const NamedArrays& arrays);

 private:
  std::vector<ParamPtr> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Binds parameters into one tape. Each Param becomes a single leaf, so a
/// table referenced by two stores collects gradient from both.
class Binding {
 public:
  explicit Binding(bool requires_grad = true) : requires_grad_(requires_grad) {}

  Value operator()(const Param& p);
  Gradients gradients() const;
  void zero_grad();
  bool requires_grad() const { return requires_grad_; }

 private:
  bool requires_grad_;
  std::map<std::string, Value> leaves_;
};

// Gradient arithmetic keyed by parameter name.
void accumulate(Gradients& into, const Gradients& g, double weight = 1.0);
double global_norm(const Gradients& g);
double max_abs_diff(const Gradients& a, const Gradients& b);

}  // namespace laln::nk
