// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/generative/prop1.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "laln/error.hpp"
#include "laln/numkernel/ops.hpp"

namespace laln {

namespace {

// Orthonormal basis of {v : sum v = 0} (Helmert vectors), one per column.
Eigen::MatrixXd tangent_basis(std::size_t t) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(t, t - 1);
  for (std::size_t k = 1; k < t; ++k) {
    const double norm = std::sqrt(static_cast<double>(k * (k + 1)));
    for (std::size_t i = 0; i < k; ++i) q(i, k - 1) = 1.0 / norm;
    q(k, k - 1) = -static_cast<double>(k) / norm;
  }
  return q;
}

void grid_points(std::size_t t, std::size_t steps, std::vector<std::size_t>& counts, std::size_t pos,
                 std::size_t left, const std::function<void(const std::vector<std::size_t>&)>& visit) {
  if (pos + 1 == t) {
    counts[pos] = left;
    visit(counts);
    return;
  }
  for (std::size_t c = 0; c <= left; ++c) {
    counts[pos] = c;
    grid_points(t, steps, counts, pos + 1, left - c, visit);
  }
}

double spectral_norm(const SimplexFunction& g, const Eigen::VectorXd& z, const Eigen::MatrixXd& q, double h) {
  const auto m = q.cols();
  auto at = [&](const Eigen::VectorXd& p) { return g(std::span<const double>(p.data(), p.size())); };
  const double g0 = at(z);
  Eigen::MatrixXd hess(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    hess(a, a) = (at(z + h * q.col(a)) - 2.0 * g0 + at(z - h * q.col(a))) / (h * h);
    for (Eigen::Index b = 0; b < a; ++b) {
      const Eigen::VectorXd u = q.col(a), v = q.col(b);
      const double d =
          (at(z + h * u + h * v) - at(z + h * u - h * v) - at(z - h * u + h * v) + at(z - h * u - h * v)) /
          (4.0 * h * h);
      hess(a, b) = hess(b, a) = d;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hess, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

GapResult prop1_gap(const SimplexFunction& g, std::span<const double> prior, std::size_t resolution,
                    double tolerance) {
  const std::size_t t = prior.size();
  if (t == 0 || t > 4) throw ParameterError("gap report supports 1 to 4 positions, got " + std::to_string(t));
  if (resolution < 3) throw ParameterError("simplex grid resolution must be at least 3");

  GapResult r;
  std::vector<double> e(t, 0.0);
  double expected = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    e[i] = 1.0;
    expected += prior[i] * g(e);
    e[i] = 0.0;
  }
  r.gap = std::abs(expected - g(prior));
  if (t > 1) {
    const Eigen::MatrixXd q = tangent_basis(t);
    const std::size_t steps = resolution - 1;
    constexpr double h = 1e-4;
    std::vector<std::size_t> counts(t);
    grid_points(t, steps, counts, 0, steps, [&](const std::vector<std::size_t>& c) {
      Eigen::VectorXd z(t);
      for (std::size_t i = 0; i < t; ++i) z(i) = static_cast<double>(c[i]) / static_cast<double>(steps);
      r.curvature = std::max(r.curvature, spectral_norm(g, z, q, h));
    });
  }
  r.satisfied = r.gap <= r.curvature + tolerance;
  return r;
}

std::vector<GapResult> prop1_gap_report(const Encoded& enc, std::size_t resolution, double tolerance) {
  std::vector<GapResult> out;
  for (std::size_t j = 0; j < enc.steps(); ++j) {
    const std::size_t y = enc.targets[j];
    const SimplexFunction g = [&](std::span<const double> z) {
      const nk::Value zv = nk::constant(nk::Array::vector(std::vector<double>(z.begin(), z.end())));
      return std::exp(predict(enc, j, zv)[y]);
    };
    const std::vector<double> prior = prior_align(enc, j).probs();
    out.push_back(prop1_gap(g, prior, resolution, tolerance));
  }
  return out;
}

}  // namespace laln
