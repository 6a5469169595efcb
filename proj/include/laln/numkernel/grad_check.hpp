// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "laln/numkernel/value.hpp"

namespace laln::nk {

using GraphBuilder = std::function<Value(std::span<const Value>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_coord = 0;
  bool finite = true;
  std::string message;  // names the coordinate when a non-finite value appears
};

/// Compares reverse-mode gradients of a scalar builder against central
/// differences at `point`. Per-coordinate error is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult grad_check(const GraphBuilder& f, const std::vector<Array>& point, double h = 1e-5);

}  // namespace laln::nk
