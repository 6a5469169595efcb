// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "laln/numkernel/params.hpp"

namespace laln {

/// Gradient estimate over repeated draws: per-coordinate mean and sample
/// variance, plus the baselines used at each output step.
struct GradReport {
  nk::Gradients mean;
  nk::Gradients variance;
  std::size_t samples = 0;
  std::vector<double> baselines;

  double total_variance() const;
};

// Welford accumulation of gradient draws.
class GradAccumulator {
 public:
  void add(const nk::Gradients& g);
  GradReport finish() const;

 private:
  std::size_t n_ = 0;
  nk::Gradients mean_;
  nk::Gradients m2_;
};

using SampleHook = std::function<void(const nk::Gradients&)>;

/// Runs `surrogate(s)` for s = 0..samples-1 on one tape, backpropagating each
/// into freshly zeroed leaves of `binding`.
GradReport estimate(nk::Binding& binding, std::size_t samples, const std::function<nk::Value(std::size_t)>& surrogate,
                    const SampleHook& on_sample = {});

// Dot product of two gradient collections over shared names.
double inner(const nk::Gradients& a, const nk::Gradients& b);

}  // namespace laln
