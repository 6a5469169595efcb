// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "laln/align/rng.hpp"
#include "laln/numkernel/value.hpp"

namespace laln::align {

/// Categorical alignment over T source positions, stored as unnormalised
/// log-weights. -inf marks positions outside the support.
class CategoricalAlign {
 public:
  explicit CategoricalAlign(std::vector<double> log_weights);
  static CategoricalAlign from_probs(std::span<const double> probs);

  std::size_t size() const { return log_weights_.size(); }
  const std::vector<double>& log_weights() const { return log_weights_; }
  const std::vector<double>& probs() const { return probs_; }
  std::vector<double> log_probs() const;
  std::size_t argmax() const;

 private:
  std::vector<double> log_weights_;
  std::vector<double> probs_;
};

std::size_t cat_sample(const CategoricalAlign& d, RngStream& rng);

// KL(q || p); +inf when q puts mass where p has none.
double cat_kl(const CategoricalAlign& q, const CategoricalAlign& p);
double cat_entropy(const CategoricalAlign& d);

/// Keeps the K most probable positions (ties go to the lower index) and
/// renormalises; everything else gets probability zero.
CategoricalAlign kmax_renormalize(const CategoricalAlign& d, std::size_t k);

// softmax((log_weights + g) / tau) for a draw g of i.i.d. Gumbel noise.
std::vector<double> gumbel_softmax_sample(const CategoricalAlign& d, double tau, RngStream& rng);

// Differentiable forms over tape values.

/// KL(q || p) from finite log-probability vectors.
nk::Value categorical_kl(const nk::Value& log_q, const nk::Value& log_p);
/// Relaxed sample with an explicit noise realisation.
nk::Value gumbel_softmax(const nk::Value& log_weights, std::span<const double> noise, double tau);
nk::Value gumbel_softmax_sample(const nk::Value& log_weights, double tau, RngStream& rng);

}  // namespace laln::align
