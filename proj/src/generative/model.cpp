// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/generative/model.hpp"

#include <cmath>

#include "laln/align/rng.hpp"
#include "laln/error.hpp"
#include "laln/numkernel/ops.hpp"

namespace laln {

using nk::Array;
using nk::Value;

void ModelConfig::validate() const {
  if (src_vocab == 0 || tgt_vocab == 0) throw ConfigError("model vocabularies must be nonempty");
  if (emb == 0 || hidden == 0 || att_hidden == 0 || out_hidden == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (task == TaskKind::set && feature_dim == 0) throw ConfigError("set task needs feature_dim > 0");
  if (!(init_scale >= 0.0)) throw ConfigError("init_scale must be nonnegative");
}

const Value& Weights::operator[](const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ContractError("no weight named '" + name + "'");
  return it->second;
}

Weights bind_weights(const nk::ParamStore& store, nk::Binding& binding) {
  Weights w;
  for (const auto& p : store.params()) w.set(p->name, binding(*p));
  return w;
}

Weights bind_weights(const nk::ParamStore& store, std::span<const Value> values) {
  if (values.size() != store.params().size()) throw ContractError("positional binding: wrong number of values");
  Weights w;
  for (std::size_t i = 0; i < values.size(); ++i) w.set(store.params()[i]->name, values[i]);
  return w;
}

std::vector<Array> param_arrays(const nk::ParamStore& store) {
  std::vector<Array> out;
  for (const auto& p : store.params()) out.push_back(p->value);
  return out;
}

void init_uniform(nk::ParamStore& store, double scale, std::uint64_t seed) {
  align::RngStream rng(seed, align::stream_id(0x696e6974));
  for (const auto& p : store.params()) {
    for (double& v : p->value.storage()) v = scale * (2.0 * rng.uniform() - 1.0);
  }
}

namespace {

void add_gru(nk::ParamStore& s, const std::string& prefix, std::size_t in, std::size_t h) {
  s.add(prefix + ".wx", {3 * h, in});
  s.add(prefix + ".wh", {3 * h, h});
  s.add(prefix + ".b", {3 * h});
}

Value run_gru(const Weights& w, const std::string& prefix, const Value& x, const Value& h) {
  return nk::gru_step(x, h, w[prefix + ".wx"], w[prefix + ".wh"], w[prefix + ".b"]);
}

void check_ids(const std::vector<std::size_t>& ids, std::size_t vocab, const char* what) {
  for (std::size_t id : ids) {
    if (id >= vocab) {
      throw InputError(std::string(what) + " id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(vocab));
    }
  }
}

Value zeros(std::size_t n) { return nk::constant(Array({n})); }

Value mean_of_scores(PriorKind prior, const Value& score) {
  if (prior == PriorKind::dirichlet) {
    return nk::softmax(nk::clamp(score, std::log(kAlphaMin), std::log(kAlphaMax)));
  }
  return nk::softmax(score);
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;
  const std::size_t d = c.state_dim();
  params_.add("emb.src", {c.src_vocab, c.emb});
  if (c.task == TaskKind::sequence) {
    params_.add("emb.tgt", {c.tgt_vocab, c.emb});
    add_gru(params_, "enc.fwd", c.emb, c.hidden);
    add_gru(params_, "enc.bwd", c.emb, c.hidden);
    add_gru(params_, "dec", c.emb + d, c.hidden);
  } else {
    add_gru(params_, "qenc", c.emb, c.hidden);
  }
  params_.add("att.ws", {c.att_hidden, d});
  params_.add("att.wq", {c.att_hidden, c.hidden});
  params_.add("att.b", {c.att_hidden});
  params_.add("att.v", {c.att_hidden});
  params_.add("out.ws", {c.out_hidden, d});
  params_.add("out.wq", {c.out_hidden, c.hidden});
  params_.add("out.b", {c.out_hidden});
  params_.add("out.w", {c.tgt_vocab, c.out_hidden});
  params_.add("out.bias", {c.tgt_vocab});
  init_uniform(params_, c.init_scale, seed);
}

namespace {

Value score_at(const Weights& w, const Value& att_src, const Value& q) {
  const Value hidden = nk::tanh(nk::add_col(att_src, nk::affine(w["att.wq"], q, w["att.b"])));
  return nk::matmul(w["att.v"], hidden);
}

void push_step(Encoded& enc, const Value& query) {
  const Weights& w = enc.w;
  enc.queries.push_back(query);
  enc.scores.push_back(score_at(w, enc.att_src, query));
  enc.prior_mean.push_back(mean_of_scores(enc.prior, enc.scores.back()));
  enc.out_query.push_back(nk::affine(w["out.wq"], query, w["out.b"]));
}

Encoded encode_sequence_source(const Model& model, const std::vector<std::size_t>& src, const Weights& w) {
  const ModelConfig& c = model.config();
  if (src.empty()) throw InputError("empty source sentence");
  check_ids(src, c.src_vocab, "source");
  Encoded enc;
  enc.prior = c.prior;
  enc.w = w;
  const Value& emb_src = w["emb.src"];
  const std::size_t T = src.size();
  std::vector<Value> embedded;
  for (std::size_t id : src) embedded.push_back(nk::embedding(emb_src, id));
  std::vector<Value> fwd(T), bwd(T);
  Value h = zeros(c.hidden);
  for (std::size_t i = 0; i < T; ++i) fwd[i] = h = run_gru(w, "enc.fwd", embedded[i], h);
  h = zeros(c.hidden);
  for (std::size_t i = T; i-- > 0;) bwd[i] = h = run_gru(w, "enc.bwd", embedded[i], h);
  std::vector<Value> cols;
  for (std::size_t i = 0; i < T; ++i) cols.push_back(nk::concat({fwd[i], bwd[i]}));
  enc.X = nk::stack_cols(cols);
  enc.att_src = nk::matmul(w["att.ws"], enc.X);
  enc.out_src = nk::matmul(w["out.ws"], enc.X);
  return enc;
}

}  // namespace

Encoded encode_source(const Model& model, const std::vector<std::size_t>& src, const Weights& w) {
  if (model.config().task != TaskKind::sequence) throw ContractError("incremental decoding needs a sequence model");
  return encode_sequence_source(model, src, w);
}

DecoderState decoder_start(const Model& model) {
  const ModelConfig& c = model.config();
  return {zeros(c.hidden), zeros(c.state_dim()), kBos};
}

void decoder_step(Encoded& enc, DecoderState& state) {
  const Weights& w = enc.w;
  state.h = run_gru(w, "dec", nk::concat({nk::embedding(w["emb.tgt"], state.prev), state.ctx}), state.h);
  push_step(enc, state.h);
  state.ctx = nk::matmul(enc.X, enc.prior_mean.back());
}

Encoded encode(const Model& model, const Example& ex, const Weights& w) {
  const ModelConfig& c = model.config();
  if (ex.tgt.empty()) throw InputError("example has no output");
  check_ids(ex.tgt, c.tgt_vocab, "target");

  if (c.task == TaskKind::set) {
    check_ids(ex.src, c.src_vocab, "question");
    if (!ex.is_set() || ex.features.rows() != c.feature_dim) {
      throw InputError("set example needs a (" + std::to_string(c.feature_dim) + ", T) feature matrix");
    }
    if (ex.features.cols() == 0) throw InputError("empty object set");
    if (ex.src.empty()) throw InputError("empty question");
    if (ex.tgt.size() != 1) throw InputError("set example needs exactly one answer");
    Encoded enc;
    enc.prior = c.prior;
    enc.w = w;
    enc.targets = ex.tgt;
    enc.X = nk::constant(ex.features);
    Value h = zeros(c.hidden);
    for (std::size_t id : ex.src) h = run_gru(w, "qenc", nk::embedding(w["emb.src"], id), h);
    enc.att_src = nk::matmul(w["att.ws"], enc.X);
    enc.out_src = nk::matmul(w["out.ws"], enc.X);
    push_step(enc, h);
    return enc;
  }

  Encoded enc = encode_sequence_source(model, ex.src, w);
  DecoderState state = decoder_start(model);
  for (std::size_t j = 0; j < ex.tgt.size(); ++j) {
    decoder_step(enc, state);
    state.prev = ex.tgt[j];
  }
  enc.targets = ex.tgt;
  return enc;
}

Value prior_log_probs(const Encoded& enc, std::size_t j) { return nk::log_softmax(enc.scores.at(j)); }

Value prior_alpha(const Encoded& enc, std::size_t j) {
  return nk::exp(nk::clamp(enc.scores.at(j), std::log(kAlphaMin), std::log(kAlphaMax)));
}

align::CategoricalAlign prior_align(const Encoded& enc, std::size_t j) {
  return align::CategoricalAlign(enc.scores.at(j).array().storage());
}

Value predict(const Encoded& enc, std::size_t j, const Value& z) {
  const Value hidden = nk::tanh(nk::add(nk::matmul(enc.out_src, z), enc.out_query.at(j)));
  return nk::log_softmax(nk::affine(enc.w["out.w"], hidden, enc.w["out.bias"]));
}

Value atom_log_probs(const Encoded& enc, std::size_t j) {
  const Value hidden = nk::tanh(nk::add_col(enc.out_src, enc.out_query.at(j)));
  return nk::log_softmax(nk::add_col(nk::matmul(enc.w["out.w"], hidden), enc.w["out.bias"]), 0);
}

Value atom_log_likelihoods(const Encoded& enc, std::size_t j) {
  return nk::row(atom_log_probs(enc, j), enc.targets.at(j));
}

Value soft_log_likelihood(const Encoded& enc, std::size_t j) {
  return nk::pick(predict(enc, j, enc.prior_mean.at(j)), enc.targets.at(j));
}

Value soft_nll(const Encoded& enc) {
  std::vector<Value> terms;
  for (std::size_t j = 0; j < enc.steps(); ++j) terms.push_back(soft_log_likelihood(enc, j));
  return nk::scale(nk::add_n(terms), -1.0);
}

Value exact_marginal_nll(const Encoded& enc) {
  std::vector<Value> terms;
  for (std::size_t j = 0; j < enc.steps(); ++j) {
    terms.push_back(nk::logsumexp(nk::add(prior_log_probs(enc, j), atom_log_likelihoods(enc, j))));
  }
  return nk::scale(nk::add_n(terms), -1.0);
}

Value jensen_nll(const Encoded& enc) {
  std::vector<Value> terms;
  for (std::size_t j = 0; j < enc.steps(); ++j) {
    terms.push_back(nk::dot(nk::exp(prior_log_probs(enc, j)), atom_log_likelihoods(enc, j)));
  }
  return nk::scale(nk::add_n(terms), -1.0);
}

}  // namespace laln
