// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "laln/align/rng.hpp"
#include "laln/generative/grad_report.hpp"
#include "laln/generative/model.hpp"

namespace laln {

enum class BaselineKind { soft, none };

struct EstimatorOptions {
  BaselineKind baseline = BaselineKind::soft;
  double baseline_shift = 0.0;  // added to every B
  bool enumerate = false;       // exact expectation instead of sampling
  std::size_t samples = 1;
  SampleHook on_sample;
};

/// Per-step quantities a score-function estimator reuses across draws.
struct ScorePieces {
  std::vector<nk::Value> log_sampler;  // log-probabilities of the sampling distribution
  std::vector<nk::Value> atoms;        // log f(x, e_i)_y
  std::vector<double> baselines;
};

// B_j = log f(x, E_p[z_j])_y (detached) or 0, plus the configured shift.
std::vector<double> baselines(const Encoded& enc, const EstimatorOptions& opts);

ScorePieces hard_pieces(const Encoded& enc, const EstimatorOptions& opts);

/// Surrogate loss whose gradient is the single-sample estimator
/// -(grad log f(x,z) + (log f(x,z) - B) grad log p(z)), z ~ p. A null rng
/// gives the probability-weighted sum over all atoms.
nk::Value hard_surrogate(const ScorePieces& pieces, align::RngStream* rng);

/// REINFORCE estimate of the gradient of jensen_nll w.r.t. the model.
GradReport hard_reinforce_grad(const Model& model, const Example& ex, align::RngStream& rng,
                               const EstimatorOptions& opts = {});

}  // namespace laln
