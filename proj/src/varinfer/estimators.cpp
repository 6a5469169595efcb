// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/varinfer/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "laln/align/dirichlet.hpp"
#include "laln/align/special.hpp"
#include "laln/error.hpp"
#include "laln/numkernel/ops.hpp"

namespace laln {

using nk::Value;

namespace {

void check_steps(const Encoded& enc, const Variational& q) {
  if (q.steps() != enc.steps()) throw ContractError("variational steps do not match the encoding");
}

void check_alpha_range(const nk::Array& alpha) {
  for (double a : alpha.storage()) {
    if (!(a >= kAlphaMin && a <= kAlphaMax)) {
      throw ParameterError("Dirichlet concentration " + std::to_string(a) + " outside the clamp range");
    }
  }
}

struct Tape {
  nk::Binding binding;
  Encoded enc;
  Variational q;
};

void build(Tape& t, const Model& model, const InferenceNet& net, const Example& ex) {
  t.enc = encode(model, ex, bind_weights(model.params(), t.binding));
  t.q = infer(net, ex, bind_weights(net.params(), t.binding));
}

std::size_t draws(const VarEstimatorOptions& opts) { return opts.enumerate ? 1 : opts.samples; }

}  // namespace

Value variational_cat_surrogate(const Encoded& enc, const Variational& q, const std::vector<double>& baselines,
                                align::RngStream* rng) {
  check_steps(enc, q);
  ScorePieces pieces;
  std::vector<Value> kl;
  for (std::size_t j = 0; j < enc.steps(); ++j) {
    pieces.log_sampler.push_back(q_log_probs(q, j));
    pieces.atoms.push_back(atom_log_likelihoods(enc, j));
    kl.push_back(align::categorical_kl(pieces.log_sampler.back(), prior_log_probs(enc, j)));
  }
  pieces.baselines = baselines;
  return nk::add(hard_surrogate(pieces, rng), nk::add_n(kl));
}

Value variational_gumbel_surrogate(const Encoded& enc, const Variational& q, double tau, align::RngStream& rng) {
  check_steps(enc, q);
  if (!(tau > 0.0)) throw ParameterError("gumbel-softmax temperature must be positive");
  std::vector<Value> terms;
  for (std::size_t j = 0; j < enc.steps(); ++j) {
    const Value lq = q_log_probs(q, j);
    const Value z = align::gumbel_softmax_sample(lq, tau, rng);
    terms.push_back(nk::sub(align::categorical_kl(lq, prior_log_probs(enc, j)),
                            nk::pick(predict(enc, j, z), enc.targets[j])));
  }
  return nk::add_n(terms);
}

std::vector<double> rws_weights(const std::vector<double>& log_p, const std::vector<double>& log_f,
                                const std::vector<double>& log_q, const std::vector<std::size_t>& atoms,
                                bool dedup) {
  std::vector<double> lw(atoms.size(), -std::numeric_limits<double>::infinity());
  std::vector<bool> seen(log_p.size(), false);
  for (std::size_t s = 0; s < atoms.size(); ++s) {
    const std::size_t i = atoms[s];
    if (dedup) {
      if (seen[i]) continue;
      seen[i] = true;
      lw[s] = log_p[i] + log_f[i];
    } else {
      lw[s] = log_p[i] + log_f[i] - log_q[i];
    }
  }
  const double m = *std::max_element(lw.begin(), lw.end());
  if (!std::isfinite(m)) throw NumericError("importance weights are all zero");
  double total = 0.0;
  for (double& v : lw) total += (v = std::exp(v - m));
  for (double& v : lw) v /= total;
  return lw;
}

Value rws_surrogate(const Encoded& enc, const Variational& q, std::size_t samples, bool dedup, align::RngStream& rng) {
  check_steps(enc, q);
  if (samples < 2) throw ParameterError("reweighted wake-sleep needs at least 2 samples");
  std::vector<Value> terms;
  for (std::size_t j = 0; j < enc.steps(); ++j) {
    const Value lp = prior_log_probs(enc, j);
    const Value lf = atom_log_likelihoods(enc, j);
    const Value lq = q_log_probs(q, j);
    const align::CategoricalAlign qd(lq.array().storage());
    std::vector<std::size_t> atoms(samples);
    for (auto& a : atoms) a = align::cat_sample(qd, rng);
    const auto w = rws_weights(lp.array().storage(), lf.array().storage(), lq.array().storage(), atoms, dedup);
    for (std::size_t s = 0; s < samples; ++s) {
      if (w[s] == 0.0) continue;
      const std::size_t i = atoms[s];
      const Value joint = nk::add(nk::pick(lp, i), nk::pick(lf, i));
      terms.push_back(nk::scale(nk::add(joint, nk::pick(lq, i)), -w[s]));
    }
  }
  return nk::add_n(terms);
}

GammaDraw rng_gamma_draw(align::RngStream& rng) {
  return [&rng](std::size_t, const nk::Array& alpha) {
    std::vector<double> out(alpha.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.log_gamma_draw(alpha[i]);
    return out;
  };
}

GammaDraw quantile_gamma_draw(std::vector<std::vector<double>> quantiles) {
  return [quantiles = std::move(quantiles)](std::size_t step, const nk::Array& alpha) {
    const auto& u = quantiles.at(step);
    if (u.size() != alpha.size()) throw ContractError("quantile draw has the wrong length");
    std::vector<double> out(alpha.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(align::gamma_p_inv(alpha[i], u[i]));
    return out;
  };
}

Value dirichlet_elbo_loss(const Encoded& enc, const Variational& q, const GammaDraw& draw) {
  check_steps(enc, q);
  std::vector<Value> terms;
  for (std::size_t j = 0; j < enc.steps(); ++j) {
    const Value aq = q_alpha(q, j);
    check_alpha_range(aq.array());
    const Value z = align::dirichlet_transform(aq, draw(j, aq.array()));
    terms.push_back(nk::sub(align::dirichlet_kl(aq, prior_alpha(enc, j)), nk::pick(predict(enc, j, z), enc.targets[j])));
  }
  return nk::add_n(terms);
}

Value dirichlet_jensen_loss(const Encoded& enc, const GammaDraw& draw) {
  std::vector<Value> terms;
  for (std::size_t j = 0; j < enc.steps(); ++j) {
    const Value ap = prior_alpha(enc, j);
    const Value z = align::dirichlet_transform(ap, draw(j, ap.array()));
    terms.push_back(nk::pick(predict(enc, j, z), enc.targets[j]));
  }
  return nk::scale(nk::add_n(terms), -1.0);
}

GradReport variational_cat_grad(const Model& model, const InferenceNet& net, const Example& ex, align::RngStream& rng,
                                const VarEstimatorOptions& opts) {
  Tape t;
  build(t, model, net, ex);
  const auto b = baselines(t.enc, opts);
  GradReport r = estimate(
      t.binding, draws(opts),
      [&](std::size_t) { return variational_cat_surrogate(t.enc, t.q, b, opts.enumerate ? nullptr : &rng); },
      opts.on_sample);
  r.baselines = b;
  return r;
}

GradReport variational_gumbel_grad(const Model& model, const InferenceNet& net, const Example& ex,
                                   align::RngStream& rng, const VarEstimatorOptions& opts) {
  if (!(opts.tau > 0.0)) throw ParameterError("gumbel-softmax temperature must be positive");
  Tape t;
  build(t, model, net, ex);
  return estimate(
      t.binding, opts.samples, [&](std::size_t) { return variational_gumbel_surrogate(t.enc, t.q, opts.tau, rng); },
      opts.on_sample);
}

GradReport rws_grad(const Model& model, const InferenceNet& net, const Example& ex, align::RngStream& rng,
                    const VarEstimatorOptions& opts) {
  Tape t;
  build(t, model, net, ex);
  return estimate(
      t.binding, opts.samples,
      [&](std::size_t) { return rws_surrogate(t.enc, t.q, opts.rws_samples, opts.dedup, rng); }, opts.on_sample);
}

GradReport variational_dirichlet_grad(const Model& model, const InferenceNet& net, const Example& ex,
                                      align::RngStream& rng, const VarEstimatorOptions& opts) {
  if (model.config().prior != PriorKind::dirichlet) throw ContractError("relaxed estimator needs a Dirichlet model");
  Tape t;
  build(t, model, net, ex);
  const GammaDraw draw = rng_gamma_draw(rng);
  return estimate(
      t.binding, opts.samples, [&](std::size_t) { return dirichlet_elbo_loss(t.enc, t.q, draw); }, opts.on_sample);
}

}  // namespace laln
