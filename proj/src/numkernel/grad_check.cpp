// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/numkernel/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "laln/error.hpp"

namespace laln::nk {

namespace {

double eval_at(const GraphBuilder& f, const std::vector<Array>& point) {
  std::vector<Value> leaves;
  leaves.reserve(point.size());
  for (const auto& a : point) leaves.push_back(constant(a));
  return f(leaves).item();
}

}  // namespace

GradCheckResult grad_check(const GraphBuilder& f, const std::vector<Array>& point, double h) {
  GradCheckResult res;
  std::vector<Value> leaves;
  leaves.reserve(point.size());
  for (const auto& a : point) leaves.push_back(parameter(a));
  Value loss = f(leaves);
  if (loss.shape().size() != 0) throw ContractError("grad_check: builder must return a scalar");
  if (!std::isfinite(loss.item())) {
    res.finite = false;
    res.max_rel_error = INFINITY;
    res.message = "non-finite loss at the base point";
    return res;
  }
  backward(loss);

  std::vector<Array> probe = point;
  for (std::size_t k = 0; k < point.size(); ++k) {
    const Array analytic = leaves[k].grad();
    for (std::size_t i = 0; i < point[k].size(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + h;
      const double up = eval_at(f, probe);
      probe[k][i] = orig - h;
      const double down = eval_at(f, probe);
      probe[k][i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) {
        res.finite = false;
        res.max_rel_error = INFINITY;
        res.worst_input = k;
        res.worst_coord = i;
        res.message = "non-finite value at input " + std::to_string(k) + " coordinate " + std::to_string(i);
        return res;
      }
      const double err =
          std::abs(analytic[i] - numeric) / std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_input = k;
        res.worst_coord = i;
      }
    }
  }
  return res;
}

}  // namespace laln::nk
