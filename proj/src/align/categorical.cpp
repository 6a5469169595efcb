// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/align/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "laln/error.hpp"
#include "laln/numkernel/ops.hpp"

namespace laln::align {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

CategoricalAlign::CategoricalAlign(std::vector<double> log_weights) : log_weights_(std::move(log_weights)) {
  if (log_weights_.empty()) throw ParameterError("categorical distribution needs at least one position");
  double m = kNegInf;
  for (double w : log_weights_) {
    if (std::isnan(w) || w == std::numeric_limits<double>::infinity()) {
      throw ParameterError("categorical log-weights must be finite or -inf");
    }
    m = std::max(m, w);
  }
  if (m == kNegInf) throw ParameterError("degenerate distribution: every log-weight is -inf");
  probs_.resize(log_weights_.size());
  double z = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) z += (probs_[i] = std::exp(log_weights_[i] - m));
  for (double& p : probs_) p /= z;
}

CategoricalAlign CategoricalAlign::from_probs(std::span<const double> probs) {
  std::vector<double> lw(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] < 0.0 || std::isnan(probs[i])) throw ParameterError("negative probability");
    lw[i] = probs[i] > 0.0 ? std::log(probs[i]) : kNegInf;
  }
  return CategoricalAlign(std::move(lw));
}

std::vector<double> CategoricalAlign::log_probs() const {
  std::vector<double> out(probs_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = probs_[i] > 0.0 ? std::log(probs_[i]) : kNegInf;
  return out;
}

std::size_t CategoricalAlign::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

std::size_t cat_sample(const CategoricalAlign& d, RngStream& rng) {
  const auto& p = d.probs();
  const double u = rng.uniform();
  double c = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last = i;
    c += p[i];
    if (u < c) return i;
  }
  return last;
}

double cat_kl(const CategoricalAlign& q, const CategoricalAlign& p) {
  if (q.size() != p.size()) throw ParameterError("cat_kl: support sizes differ");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double qi = q.probs()[i];
    if (qi <= 0.0) continue;
    const double pi = p.probs()[i];
    if (pi <= 0.0) return std::numeric_limits<double>::infinity();
    kl += qi * (std::log(qi) - std::log(pi));
  }
  return std::max(kl, 0.0);
}

double cat_entropy(const CategoricalAlign& d) {
  double h = 0.0;
  for (double p : d.probs()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

CategoricalAlign kmax_renormalize(const CategoricalAlign& d, std::size_t k) {
  if (k < 1 || k > d.size()) {
    throw ParameterError("kmax_renormalize: K=" + std::to_string(k) + " outside [1, " + std::to_string(d.size()) + "]");
  }
  const auto& p = d.probs();
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  std::vector<double> kept(p.size(), 0.0);
  double z = 0.0;
  for (std::size_t r = 0; r < k; ++r) z += p[order[r]];
  for (std::size_t r = 0; r < k; ++r) kept[order[r]] = p[order[r]] / z;
  return CategoricalAlign::from_probs(kept);
}

std::vector<double> gumbel_softmax_sample(const CategoricalAlign& d, double tau, RngStream& rng) {
  if (!(tau > 0.0)) throw ParameterError("gumbel-softmax temperature must be positive");
  const auto lp = d.log_probs();
  std::vector<double> y(lp.size());
  double m = kNegInf;
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = (lp[i] + rng.gumbel()) / tau;
    m = std::max(m, y[i]);
  }
  double z = 0.0;
  for (double& v : y) z += (v = std::exp(v - m));
  for (double& v : y) v /= z;
  return y;
}

nk::Value categorical_kl(const nk::Value& log_q, const nk::Value& log_p) {
  return nk::dot(nk::exp(log_q), nk::sub(log_q, log_p));
}

nk::Value gumbel_softmax(const nk::Value& log_weights, std::span<const double> noise, double tau) {
  if (!(tau > 0.0)) throw ParameterError("gumbel-softmax temperature must be positive");
  if (noise.size() != log_weights.size()) throw ParameterError("gumbel_softmax: noise length mismatch");
  nk::Value g = nk::constant(nk::Array::vector(std::vector<double>(noise.begin(), noise.end())));
  return nk::softmax(nk::scale(nk::add(nk::log_softmax(log_weights), g), 1.0 / tau));
}

nk::Value gumbel_softmax_sample(const nk::Value& log_weights, double tau, RngStream& rng) {
  if (!(tau > 0.0)) throw ParameterError("gumbel-softmax temperature must be positive");
  std::vector<double> noise(log_weights.size());
  for (double& g : noise) g = rng.gumbel();
  return gumbel_softmax(log_weights, noise, tau);
}

}  // namespace laln::align
