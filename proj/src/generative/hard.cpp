// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/generative/hard.hpp"

#include <cmath>

#include "laln/numkernel/ops.hpp"

namespace laln {

std::vector<double> baselines(const Encoded& enc, const EstimatorOptions& opts) {
  std::vector<double> b(enc.steps(), opts.baseline_shift);
  if (opts.baseline == BaselineKind::soft) {
    for (std::size_t j = 0; j < enc.steps(); ++j) b[j] += soft_log_likelihood(enc, j).item();
  }
  return b;
}

ScorePieces hard_pieces(const Encoded& enc, const EstimatorOptions& opts) {
  ScorePieces p;
  for (std::size_t j = 0; j < enc.steps(); ++j) {
    p.log_sampler.push_back(prior_log_probs(enc, j));
    p.atoms.push_back(atom_log_likelihoods(enc, j));
  }
  p.baselines = baselines(enc, opts);
  return p;
}

nk::Value hard_surrogate(const ScorePieces& pieces, align::RngStream* rng) {
  std::vector<nk::Value> terms;
  for (std::size_t j = 0; j < pieces.atoms.size(); ++j) {
    const nk::Value& lp = pieces.log_sampler[j];
    const nk::Value& ll = pieces.atoms[j];
    const double b = pieces.baselines[j];
    auto atom_term = [&](std::size_t i) {
      const double reward = ll[i] - b;
      return nk::add(nk::pick(ll, i), nk::scale(nk::pick(lp, i), reward));
    };
    if (rng != nullptr) {
      terms.push_back(atom_term(align::cat_sample(align::CategoricalAlign(lp.array().storage()), *rng)));
    } else {
      for (std::size_t i = 0; i < ll.size(); ++i) {
        const double w = std::exp(lp[i]);
        if (w > 0.0) terms.push_back(nk::scale(atom_term(i), w));
      }
    }
  }
  return nk::scale(nk::add_n(terms), -1.0);
}

GradReport hard_reinforce_grad(const Model& model, const Example& ex, align::RngStream& rng,
                               const EstimatorOptions& opts) {
  nk::Binding binding;
  const Encoded enc = encode(model, ex, bind_weights(model.params(), binding));
  const ScorePieces pieces = hard_pieces(enc, opts);
  const std::size_t n = opts.enumerate ? 1 : opts.samples;
  GradReport r = estimate(
      binding, n, [&](std::size_t) { return hard_surrogate(pieces, opts.enumerate ? nullptr : &rng); },
      opts.on_sample);
  r.baselines = pieces.baselines;
  return r;
}

}  // namespace laln
