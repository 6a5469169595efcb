// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "laln/align/categorical.hpp"
#include "laln/example.hpp"
#include "laln/numkernel/params.hpp"

namespace laln {

enum class TaskKind { sequence, set };
enum class PriorKind { categorical, dirichlet };

struct ModelConfig {
  TaskKind task = TaskKind::sequence;
  PriorKind prior = PriorKind::categorical;
  std::size_t src_vocab = 0;    // source words, or question words for sets
  std::size_t tgt_vocab = 0;    // target words, or answer classes for sets
  std::size_t feature_dim = 0;  // set task object features
  std::size_t emb = 32;
  std::size_t hidden = 64;
  std::size_t att_hidden = 64;
  std::size_t out_hidden = 64;
  double init_scale = 0.1;

  std::size_t state_dim() const { return task == TaskKind::set ? feature_dim : 2 * hidden; }
  void validate() const;
};

/// Parameter handles for one tape, keyed by parameter name.
class Weights {
 public:
  Weights() = default;
  const nk::Value& operator[](const std::string& name) const;
  void set(const std::string& name, nk::Value v) { values_[name] = std::move(v); }
  bool contains(const std::string& name) const { return values_.count(name) != 0; }

 private:
  std::map<std::string, nk::Value> values_;
};

Weights bind_weights(const nk::ParamStore& store, nk::Binding& binding);
// Positional binding in store order, as produced by param_arrays().
Weights bind_weights(const nk::ParamStore& store, std::span<const nk::Value> values);
std::vector<nk::Array> param_arrays(const nk::ParamStore& store);

// Dirichlet concentrations are exp(score) clamped to this range.
inline constexpr double kAlphaMin = 1e-3;
inline constexpr double kAlphaMax = 1e3;

/// Generative alignment model: source encoder, query encoder with input
/// feeding, MLP attention scorer and MLP predictor.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  nk::ParamStore& params() { return params_; }
  const nk::ParamStore& params() const { return params_; }

 private:
  ModelConfig config_;
  nk::ParamStore params_;
};

// Uniform [-scale, scale] fill of every array in the store.
void init_uniform(nk::ParamStore& store, double scale, std::uint64_t seed);

struct Encoded {
  PriorKind prior = PriorKind::categorical;
  Weights w;
  nk::Value X;                           // (d, T)
  nk::Value att_src;                     // attention input weights applied to X
  std::vector<nk::Value> queries;        // x~_j, one per output step
  std::vector<nk::Value> scores;         // a(x, x~_j), (T)
  std::vector<nk::Value> prior_mean;     // E_p[z_j], (T)
  std::vector<std::size_t> targets;
  nk::Value out_src;                     // predictor input weights applied to X, (O, T)
  std::vector<nk::Value> out_query;      // query half of the predictor input plus bias, (O)

  std::size_t positions() const { return X.shape()[1]; }
  std::size_t steps() const { return scores.size(); }
};

Encoded encode(const Model& model, const Example& ex, const Weights& w);

// Incremental decoding for sequence models. encode_source leaves the encoding without output steps;
// each decoder_step appends one step (with no target) and feeds its soft context forward.
struct DecoderState {
  nk::Value h;
  nk::Value ctx;
  std::size_t prev = kBos;
};

Encoded encode_source(const Model& model, const std::vector<std::size_t>& src, const Weights& w);
DecoderState decoder_start(const Model& model);
void decoder_step(Encoded& enc, DecoderState& state);

// Categorical prior log-probabilities at step j.
nk::Value prior_log_probs(const Encoded& enc, std::size_t j);
// Dirichlet prior concentrations at step j.
nk::Value prior_alpha(const Encoded& enc, std::size_t j);
align::CategoricalAlign prior_align(const Encoded& enc, std::size_t j);

/// log f(x, z) over the output vocabulary for any z in the simplex.
nk::Value predict(const Encoded& enc, std::size_t j, const nk::Value& z);
/// log f(x, e_i) for every atom: (V, T).
nk::Value atom_log_probs(const Encoded& enc, std::size_t j);
/// log f(x, e_i)_y for the observed y_j: (T).
nk::Value atom_log_likelihoods(const Encoded& enc, std::size_t j);
/// log f(x, E_p[z])_y, the soft-attention score of the observed token.
nk::Value soft_log_likelihood(const Encoded& enc, std::size_t j);

// Objectives, summed over output steps.
nk::Value soft_nll(const Encoded& enc);
nk::Value exact_marginal_nll(const Encoded& enc);
nk::Value jensen_nll(const Encoded& enc);

}  // namespace laln
