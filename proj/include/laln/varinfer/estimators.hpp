// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "laln/generative/hard.hpp"
#include "laln/varinfer/inference.hpp"

namespace laln {

/// Score-function surrogate for the categorical ELBO: per step z ~ q,
/// -log f(x,z) - (log f(x,z) - B) log q(z) + KL(q || p), with B the soft
/// attention baseline under p. A null rng enumerates z.
nk::Value variational_cat_surrogate(const Encoded& enc, const Variational& q, const std::vector<double>& baselines,
                                    align::RngStream* rng);

/// Pathwise surrogate with z = gumbel_softmax(log q, g, tau) per step.
nk::Value variational_gumbel_surrogate(const Encoded& enc, const Variational& q, double tau, align::RngStream& rng);

/// Self-normalised importance weights over the given atoms, proportional
/// to p(y, z) / q(z); with `dedup` each distinct atom appears once and is
/// weighted by p(y, z) alone.
std::vector<double> rws_weights(const std::vector<double>& log_p, const std::vector<double>& log_f,
                                const std::vector<double>& log_q, const std::vector<std::size_t>& atoms,
                                bool dedup);

/// Reweighted wake-sleep surrogate with S draws per step: the model term
/// -sum_s w_s log p(y, z_s) and the wake-phase term -sum_s w_s log q(z_s).
nk::Value rws_surrogate(const Encoded& enc, const Variational& q, std::size_t samples, bool dedup,
                        align::RngStream& rng);

// Log-Gamma draws for a concentration vector, one call per output step.
using GammaDraw = std::function<std::vector<double>(std::size_t step, const nk::Array& alpha)>;
GammaDraw rng_gamma_draw(align::RngStream& rng);
// Inverse-CDF draws at fixed quantile levels, one vector per step.
GammaDraw quantile_gamma_draw(std::vector<std::vector<double>> quantiles);

/// -log f(x, z) + KL(Dir(alpha_q) || Dir(alpha_p)) per step, z ~ Dir(alpha_q)
/// reparameterised through `draw`.
nk::Value dirichlet_elbo_loss(const Encoded& enc, const Variational& q, const GammaDraw& draw);
/// -log f(x, z) per step with z ~ Dir(alpha_p): the relaxed Jensen bound.
nk::Value dirichlet_jensen_loss(const Encoded& enc, const GammaDraw& draw);

struct VarEstimatorOptions : EstimatorOptions {
  double tau = 0.5;       // Gumbel-Softmax temperature
  std::size_t rws_samples = 5;
  bool dedup = false;
};

GradReport variational_cat_grad(const Model& model, const InferenceNet& net, const Example& ex, align::RngStream& rng,
                                const VarEstimatorOptions& opts = {});
GradReport variational_gumbel_grad(const Model& model, const InferenceNet& net, const Example& ex,
                                   align::RngStream& rng, const VarEstimatorOptions& opts = {});
GradReport rws_grad(const Model& model, const InferenceNet& net, const Example& ex, align::RngStream& rng,
                    const VarEstimatorOptions& opts = {});
GradReport variational_dirichlet_grad(const Model& model, const InferenceNet& net, const Example& ex,
                                      align::RngStream& rng, const VarEstimatorOptions& opts = {});

}  // namespace laln
