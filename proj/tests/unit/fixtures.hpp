// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "laln/generative/model.hpp"
#include "laln/numkernel/ops.hpp"

namespace laln::testing {

inline ModelConfig tiny_seq_config(std::size_t src_vocab = 7, std::size_t tgt_vocab = 8) {
  ModelConfig c;
  c.src_vocab = src_vocab;
  c.tgt_vocab = tgt_vocab;
  c.emb = 4;
  c.hidden = 5;
  c.att_hidden = 4;
  c.out_hidden = 6;
  c.init_scale = 0.5;
  return c;
}

inline ModelConfig tiny_set_config(std::size_t features = 3) {
  ModelConfig c = tiny_seq_config(6, 4);
  c.task = TaskKind::set;
  c.feature_dim = features;
  return c;
}

// Source of length t and t content targets followed by eos.
inline Example random_seq_example(std::mt19937_64& gen, const ModelConfig& c, std::size_t t, std::size_t j) {
  std::uniform_int_distribution<std::size_t> src(1, c.src_vocab - 1), tgt(3, c.tgt_vocab - 1);
  Example ex;
  for (std::size_t i = 0; i < t; ++i) ex.src.push_back(src(gen));
  for (std::size_t k = 0; k + 1 < j; ++k) ex.tgt.push_back(tgt(gen));
  ex.tgt.push_back(kEos);
  ex.gold.assign(j, -1);
  return ex;
}

inline Example random_set_example(std::mt19937_64& gen, const ModelConfig& c, std::size_t t) {
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<std::size_t> q(1, c.src_vocab - 1), a(0, c.tgt_vocab - 1);
  Example ex;
  ex.features = nk::Array({c.feature_dim, t});
  for (double& v : ex.features.storage()) v = nd(gen);
  ex.src = {q(gen), q(gen)};
  ex.tgt = {a(gen)};
  ex.gold = {-1};
  return ex;
}

// Emission probability of token 1 from a mixture z under the hand encoding.
inline double hand_emit(const std::vector<double>& emit, const std::vector<double>& z) {
  double s = 0.0;
  for (std::size_t i = 0; i < emit.size(); ++i) s += z[i] * std::atanh(std::log(emit[i] / (1 - emit[i])) / 5.0);
  return 1.0 / (1.0 + std::exp(-5.0 * std::tanh(s)));
}

/// One output step over two tokens; atom i emits token 1 with probability
/// emit[i] and the prior is `prior`.
inline Encoded hand_encoded(const std::vector<double>& prior, const std::vector<double>& emit) {
  const std::size_t t = prior.size();
  Encoded enc;
  std::vector<double> scores(t), src(t);
  for (std::size_t i = 0; i < t; ++i) {
    scores[i] = prior[i] > 0 ? std::log(prior[i]) : -1000.0;
    src[i] = std::atanh(std::log(emit[i] / (1 - emit[i])) / 5.0);
  }
  enc.X = nk::constant(nk::Array({1, t}));
  enc.queries = {nk::constant(nk::Array({1}))};
  enc.scores = {nk::constant(nk::Array::vector(scores))};
  enc.prior_mean = {nk::softmax(enc.scores[0])};
  enc.targets = {1};
  enc.out_src = nk::constant(nk::Array::matrix(1, t, src));
  enc.out_query = {nk::constant(nk::Array({1}))};
  enc.w.set("out.w", nk::constant(nk::Array::matrix(2, 1, {0.0, 5.0})));
  enc.w.set("out.bias", nk::constant(nk::Array({2})));
  return enc;
}

}  // namespace laln::testing
