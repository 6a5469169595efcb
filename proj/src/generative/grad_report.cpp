// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/generative/grad_report.hpp"

#include "laln/error.hpp"

namespace laln {

double GradReport::total_variance() const {
  double s = 0.0;
  for (const auto& [name, v] : variance) {
    for (double x : v.storage()) s += x;
  }
  return s;
}

void GradAccumulator::add(const nk::Gradients& g) {
  ++n_;
  for (const auto& [name, x] : g) {
    auto [it, fresh] = mean_.try_emplace(name, nk::Array::zeros_like(x));
    auto& m2 = m2_.try_emplace(name, nk::Array::zeros_like(x)).first->second;
    nk::Array& m = it->second;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double delta = x[k] - m[k];
      m[k] += delta / static_cast<double>(n_);
      m2[k] += delta * (x[k] - m[k]);
    }
  }
}

GradReport GradAccumulator::finish() const {
  GradReport r;
  r.samples = n_;
  r.mean = mean_;
  for (const auto& [name, m2] : m2_) {
    nk::Array v = m2;
    if (n_ > 1) v *= 1.0 / static_cast<double>(n_ - 1);
    else v.fill(0.0);
    r.variance.emplace(name, std::move(v));
  }
  return r;
}

GradReport estimate(nk::Binding& binding, std::size_t samples, const std::function<nk::Value(std::size_t)>& surrogate,
                    const SampleHook& on_sample) {
  if (samples == 0) throw ParameterError("estimator needs at least one sample");
  GradAccumulator acc;
  for (std::size_t s = 0; s < samples; ++s) {
    binding.zero_grad();
    nk::backward(surrogate(s));
    const nk::Gradients g = binding.gradients();
    if (on_sample) on_sample(g);
    acc.add(g);
  }
  return acc.finish();
}

double inner(const nk::Gradients& a, const nk::Gradients& b) {
  double s = 0.0;
  for (const auto& [name, x] : a) {
    auto it = b.find(name);
    if (it == b.end()) continue;
    for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * it->second[k];
  }
  return s;
}

}  // namespace laln
