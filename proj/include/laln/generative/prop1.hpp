// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "laln/generative/model.hpp"

namespace laln {

/// Soft-attention gap against the curvature bound for one output:
/// gap = |E_p[g(z)] - g(E_p[z])|, curvature = max spectral norm of the
/// Hessian of g over a simplex grid.
struct GapResult {
  double gap = 0.0;
  double curvature = 0.0;
  bool satisfied = false;
};

using SimplexFunction = std::function<double(std::span<const double>)>;

/// `g` must accept points slightly off the simplex (finite differences).
/// The grid has `resolution` points along each edge; T <= 4.
GapResult prop1_gap(const SimplexFunction& g, std::span<const double> prior, std::size_t resolution,
                    double tolerance = 1e-9);

/// One result per output step, with g(z) = f(x, z)_y.
std::vector<GapResult> prop1_gap_report(const Encoded& enc, std::size_t resolution, double tolerance = 1e-9);

}  // namespace laln
