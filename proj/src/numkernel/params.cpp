// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/numkernel/params.hpp"

#include <algorithm>
#include <cmath>

#include "laln/error.hpp"

namespace laln::nk {

Param& ParamStore::add(const std::string& name, Shape shape) {
  if (contains(name)) throw ContractError("ParamStore: duplicate parameter " + name);
  auto p = std::make_shared<Param>(Param{name, Array(std::move(shape))});
  index_[name] = params_.size();
  params_.push_back(p);
  return *p;
}

void ParamStore::share(const ParamPtr& p) {
  if (contains(p->name)) throw ContractError("ParamStore: duplicate parameter " + p->name);
  index_[p->name] = params_.size();
  params_.push_back(p);
}

Param& ParamStore::at(const std::string& name) { return *ptr(name); }
const Param& ParamStore::at(const std::string& name) const { return *ptr(name); }

const ParamPtr& ParamStore::ptr(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamStore: unknown parameter " + name);
  return params_[it->second];
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

NamedArrays ParamStore::to_named() const {
  NamedArrays out;
  for (const auto& p : params_) out.emplace(p->name, p->value);
  return out;
}

void ParamStore::load_named(const NamedArrays& arrays) {
  for (const auto& p : params_) {
    auto it = arrays.find(p->name);
    if (it == arrays.end()) throw InputError("checkpoint is missing parameter " + p->name);
    if (it->second.shape() != p->value.shape()) {
      throw InputError("checkpoint parameter " + p->name + " has shape " + shape_str(it->second.shape()) +
                       ", expected " + shape_str(p->value.shape()));
    }
    p->value = it->second;
  }
}

Value Binding::operator()(const Param& p) {
  auto it = leaves_.find(p.name);
  if (it != leaves_.end()) return it->second;
  Value v = requires_grad_ ? parameter(p.value) : constant(p.value);
  leaves_.emplace(p.name, v);
  return v;
}

Gradients Binding::gradients() const {
  Gradients out;
  for (const auto& [name, v] : leaves_) out.emplace(name, v.grad());
  return out;
}

void Binding::zero_grad() {
  for (auto& [name, v] : leaves_) {
    if (v.node().grad_ready) v.node().grad.fill(0.0);
  }
}

void accumulate(Gradients& into, const Gradients& g, double weight) {
  for (const auto& [name, arr] : g) {
    auto it = into.find(name);
    if (it == into.end()) {
      Array scaled = arr;
      scaled *= weight;
      into.emplace(name, std::move(scaled));
    } else {
      Array& dst = it->second;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += weight * arr[i];
    }
  }
}

double global_norm(const Gradients& g) {
  double s = 0.0;
  for (const auto& [name, arr] : g)
    for (double v : arr.values()) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(const Gradients& a, const Gradients& b) {
  double m = 0.0;
  for (const auto& [name, arr] : a) {
    auto it = b.find(name);
    if (it == b.end()) {
      for (double v : arr.values()) m = std::max(m, std::abs(v));
    } else {
      m = std::max(m, max_abs_diff(arr, it->second));
    }
  }
  for (const auto& [name, arr] : b) {
    if (a.count(name)) continue;
    for (double v : arr.values()) m = std::max(m, std::abs(v));
  }
  return m;
}

}  // namespace laln::nk
