// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "laln/align/categorical.hpp"
#include "laln/generative/model.hpp"

namespace laln {

struct InferConfig {
  std::size_t hidden = 64;
  std::size_t answer_dim = 32;   // set task answer embedding h_y
  std::size_t gate_hidden = 64;  // set task scorer width
  double init_scale = 0.1;

  void validate() const;
};

/// Inference network q(z | x, x~, y). Word embeddings are the model's own
/// tables, shared by reference; every other array belongs to this net and
/// is named with the "inf." prefix.
class InferenceNet {
 public:
  InferenceNet(InferConfig config, Model& model, std::uint64_t seed);

  const InferConfig& config() const { return config_; }
  TaskKind task() const { return task_; }
  PriorKind prior() const { return prior_; }
  std::size_t feature_dim() const { return feature_dim_; }
  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }

 private:
  InferConfig config_;
  TaskKind task_;
  PriorKind prior_;
  std::size_t feature_dim_;
  nk::ParamStore params_;
};

/// Per-step variational scores. Categorical q is softmax(score); Dirichlet
/// q has alpha = exp(score) clamped to [kAlphaMin, kAlphaMax].
struct Variational {
  PriorKind kind = PriorKind::categorical;
  std::vector<nk::Value> scores;

  std::size_t steps() const { return scores.size(); }
};

// Bilinear scores h_j' U x_i from bidirectional passes over source and target.
Variational infer_seq(const InferenceNet& net, const Example& ex, const Weights& w);
// Gated answer-conditioned scorer over the object set.
Variational infer_set(const InferenceNet& net, const Example& ex, const Weights& w);
Variational infer(const InferenceNet& net, const Example& ex, const Weights& w);

nk::Value q_log_probs(const Variational& q, std::size_t j);
nk::Value q_alpha(const Variational& q, std::size_t j);
align::CategoricalAlign q_align(const Variational& q, std::size_t j);

/// Negative ELBO in enumerated form:
/// -sum_j [sum_i q_i log f(x, e_i)_y - KL(q_j || p_j)].
nk::Value elbo_nll(const Encoded& enc, const Variational& q);

}  // namespace laln
