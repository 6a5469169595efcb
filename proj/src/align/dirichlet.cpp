// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/align/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "laln/align/special.hpp"
#include "laln/error.hpp"
#include "laln/numkernel/ops.hpp"

namespace laln::align {

namespace {

void check_alpha(std::span<const double> alpha) {
  if (alpha.empty()) throw ParameterError("Dirichlet needs at least one position");
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!(alpha[i] > 0.0) || !std::isfinite(alpha[i])) {
      throw ParameterError("Dirichlet concentration alpha[" + std::to_string(i) + "] = " + std::to_string(alpha[i]) +
                           " must be positive");
    }
  }
}

std::vector<double> softmax_of(std::span<const double> logs) {
  const double m = *std::max_element(logs.begin(), logs.end());
  std::vector<double> z(logs.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (z[i] = std::exp(logs[i] - m));
  for (double& v : z) v /= s;
  return z;
}

}  // namespace

DirichletAlign::DirichletAlign(std::vector<double> alpha) : alpha_(std::move(alpha)) { check_alpha(alpha_); }

std::vector<double> DirichletAlign::mean() const {
  double s = 0.0;
  for (double a : alpha_) s += a;
  std::vector<double> m(alpha_.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = alpha_[i] / s;
  return m;
}

std::vector<double> dir_sample(const DirichletAlign& d, RngStream& rng) {
  std::vector<double> logs(d.size());
  for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = rng.log_gamma_draw(d.alpha()[i]);
  return softmax_of(logs);
}

double dir_kl(const DirichletAlign& q, const DirichletAlign& p) {
  if (q.size() != p.size()) throw ParameterError("dir_kl: dimensions differ");
  double a0 = 0.0, b0 = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    a0 += q.alpha()[i];
    b0 += p.alpha()[i];
  }
  double kl = log_gamma(a0) - log_gamma(b0);
  const double psi0 = digamma(a0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double a = q.alpha()[i], b = p.alpha()[i];
    kl += log_gamma(b) - log_gamma(a) + (a - b) * (digamma(a) - psi0);
  }
  return std::max(kl, 0.0);
}

double gamma_dlogx_dalpha(double alpha, double log_x) {
  constexpr double kSmallLogX = -23.0;  // x < 1e-10
  if (log_x < kSmallLogX) return -(log_x - digamma(alpha + 1.0)) / alpha;
  const double x = std::exp(log_x);
  const double h = 1e-5 * alpha;
  const double dp = (gamma_p(alpha + h, x) - gamma_p(alpha - h, x)) / (2.0 * h);
  const double log_xpdf = alpha * log_x - x - log_gamma(alpha);
  const double out = -dp / std::exp(log_xpdf);
  return std::isfinite(out) ? out : 0.0;
}

nk::Value dirichlet_kl(const nk::Value& alpha_q, const nk::Value& alpha_p) {
  if (alpha_q.shape() != alpha_p.shape() || alpha_q.shape().size() != 1) {
    throw ShapeError("dirichlet_kl: shapes " + nk::shape_str(alpha_q.shape()) + " and " +
                     nk::shape_str(alpha_p.shape()) + " must be equal vectors");
  }
  const DirichletAlign q(alpha_q.array().storage());
  const DirichletAlign p(alpha_p.array().storage());
  const double kl = dir_kl(q, p);
  return nk::make_result(
      nk::Array::scalar(kl), {alpha_q, alpha_p},
      [](nk::Node& self) {
        const nk::Array& a = self.parents[0]->value;
        const nk::Array& b = self.parents[1]->value;
        const std::size_t n = a.size();
        double a0 = 0.0, b0 = 0.0, diff = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          a0 += a[i];
          b0 += b[i];
          diff += a[i] - b[i];
        }
        const double g = self.grad[0];
        const double psi_a0 = digamma(a0), tri_a0 = trigamma(a0), psi_b0 = digamma(b0);
        if (self.parents[0]->requires_grad) {
          nk::Array& ga = self.parents[0]->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) ga[i] += g * ((a[i] - b[i]) * trigamma(a[i]) - tri_a0 * diff);
        }
        if (self.parents[1]->requires_grad) {
          nk::Array& gb = self.parents[1]->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            gb[i] += g * (digamma(b[i]) - psi_b0 - (digamma(a[i]) - psi_a0));
          }
        }
      },
      "dirichlet_kl");
}

nk::Value dirichlet_transform(const nk::Value& alpha, std::span<const double> log_gammas) {
  if (alpha.shape().size() != 1 || alpha.size() != log_gammas.size()) {
    throw ShapeError("dirichlet_transform: alpha " + nk::shape_str(alpha.shape()) + " vs " +
                     std::to_string(log_gammas.size()) + " draws");
  }
  check_alpha(alpha.array().storage());
  std::vector<double> z = softmax_of(log_gammas);
  std::vector<double> dlog(log_gammas.size());
  for (std::size_t i = 0; i < dlog.size(); ++i) dlog[i] = gamma_dlogx_dalpha(alpha.array()[i], log_gammas[i]);
  return nk::make_result(
      nk::Array::vector(std::move(z)), {alpha},
      [dlog = std::move(dlog)](nk::Node& self) {
        const nk::Array& z = self.value;
        double gz = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) gz += self.grad[k] * z[k];
        nk::Array& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < z.size(); ++i) ga[i] += z[i] * (self.grad[i] - gz) * dlog[i];
      },
      "dirichlet_rsample");
}

nk::Value dirichlet_rsample(const nk::Value& alpha, RngStream& rng) {
  check_alpha(alpha.array().storage());
  std::vector<double> logs(alpha.size());
  for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = rng.log_gamma_draw(alpha.array()[i]);
  return dirichlet_transform(alpha, logs);
}

}  // namespace laln::align
