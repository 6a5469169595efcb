// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "laln/align/rng.hpp"
#include "laln/numkernel/value.hpp"

namespace laln::align {

/// Dirichlet over the simplex of T source positions.
class DirichletAlign {
 public:
  explicit DirichletAlign(std::vector<double> alpha);

  std::size_t size() const { return alpha_.size(); }
  const std::vector<double>& alpha() const { return alpha_; }
  std::vector<double> mean() const;

 private:
  std::vector<double> alpha_;
};

// Normalised Gamma draws; computed in log space.
std::vector<double> dir_sample(const DirichletAlign& d, RngStream& rng);
double dir_kl(const DirichletAlign& q, const DirichletAlign& p);

/// d(log x)/d(alpha) for x ~ Gamma(alpha, 1) held at fixed CDF level, by
/// implicit differentiation: -dP(alpha, x)/dalpha / (x * density(x)).
/// dP/dalpha is a central difference of the regularised incomplete gamma;
/// for x -> 0 the leading-order series -(log x - digamma(alpha+1)) / alpha
/// is used instead.
double gamma_dlogx_dalpha(double alpha, double log_x);

// Differentiable forms.

/// Closed-form KL(Dir(alpha_q) || Dir(alpha_p)); gradients through both.
nk::Value dirichlet_kl(const nk::Value& alpha_q, const nk::Value& alpha_p);
/// Simplex point from fixed log-Gamma draws; gradients w.r.t. alpha use the
/// implicit reparameterisation above.
nk::Value dirichlet_transform(const nk::Value& alpha, std::span<const double> log_gammas);
nk::Value dirichlet_rsample(const nk::Value& alpha, RngStream& rng);

}  // namespace laln::align
