// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/varinfer/inference.hpp"

#include <cmath>

#include "laln/error.hpp"
#include "laln/numkernel/ops.hpp"

namespace laln {

using nk::Array;
using nk::Value;

void InferConfig::validate() const {
  if (hidden == 0 || answer_dim == 0 || gate_hidden == 0) throw ConfigError("inference dimensions must be positive");
  if (!(init_scale >= 0.0)) throw ConfigError("inference init_scale must be nonnegative");
}

namespace {

void add_gru(nk::ParamStore& s, const std::string& prefix, std::size_t in, std::size_t h) {
  s.add(prefix + ".wx", {3 * h, in});
  s.add(prefix + ".wh", {3 * h, h});
  s.add(prefix + ".b", {3 * h});
}

// Bidirectional pass; column i is [forward_i; backward_i].
Value bidirectional(const Weights& w, const std::string& prefix, const Value& table,
                    const std::vector<std::size_t>& ids, std::size_t hidden) {
  const std::size_t n = ids.size();
  std::vector<Value> emb, fwd(n), bwd(n);
  for (std::size_t id : ids) emb.push_back(nk::embedding(table, id));
  Value h = nk::constant(Array({hidden}));
  for (std::size_t i = 0; i < n; ++i) {
    fwd[i] = h = nk::gru_step(emb[i], h, w[prefix + ".fwd.wx"], w[prefix + ".fwd.wh"], w[prefix + ".fwd.b"]);
  }
  h = nk::constant(Array({hidden}));
  for (std::size_t i = n; i-- > 0;) {
    bwd[i] = h = nk::gru_step(emb[i], h, w[prefix + ".bwd.wx"], w[prefix + ".bwd.wh"], w[prefix + ".bwd.b"]);
  }
  std::vector<Value> cols;
  for (std::size_t i = 0; i < n; ++i) cols.push_back(nk::concat({fwd[i], bwd[i]}));
  return nk::stack_cols(cols);
}

}  // namespace

InferenceNet::InferenceNet(InferConfig config, Model& model, std::uint64_t seed)
    : config_(std::move(config)),
      task_(model.config().task),
      prior_(model.config().prior),
      feature_dim_(model.config().feature_dim) {
  config_.validate();
  const auto& mc = model.config();
  const std::size_t h = config_.hidden;
  if (task_ == TaskKind::sequence) {
    add_gru(params_, "inf.src.fwd", mc.emb, h);
    add_gru(params_, "inf.src.bwd", mc.emb, h);
    add_gru(params_, "inf.tgt.fwd", mc.emb, h);
    add_gru(params_, "inf.tgt.bwd", mc.emb, h);
    params_.add("inf.U", {2 * h, 2 * h});
  } else {
    add_gru(params_, "inf.qenc", mc.emb, h);
    params_.add("inf.ans", {mc.tgt_vocab, config_.answer_dim});
    params_.add("inf.U1", {config_.gate_hidden, mc.feature_dim});
    params_.add("inf.U2", {config_.gate_hidden, h});
    params_.add("inf.V1", {mc.feature_dim, config_.answer_dim});
    params_.add("inf.V2", {h, config_.answer_dim});
    params_.add("inf.u", {config_.gate_hidden});
  }
  init_uniform(params_, config_.init_scale, seed ^ 0x9e3779b97f4a7c15ULL);
  params_.share(model.params().ptr("emb.src"));
  if (task_ == TaskKind::sequence) params_.share(model.params().ptr("emb.tgt"));
}

Variational infer_seq(const InferenceNet& net, const Example& ex, const Weights& w) {
  if (net.task() != TaskKind::sequence) throw ContractError("infer_seq on a set-task network");
  if (ex.src.empty() || ex.tgt.empty()) throw InputError("empty source or target");
  const std::size_t h = net.config().hidden;
  const Value xs = bidirectional(w, "inf.src", w["emb.src"], ex.src, h);  // (2h, T)
  const Value ht = bidirectional(w, "inf.tgt", w["emb.tgt"], ex.tgt, h);  // (2h, J)
  const Value s = nk::matmul(nk::transpose(ht), nk::matmul(w["inf.U"], xs));  // (J, T)
  Variational q;
  q.kind = net.prior();
  for (std::size_t j = 0; j < ex.tgt.size(); ++j) q.scores.push_back(nk::row(s, j));
  return q;
}

Variational infer_set(const InferenceNet& net, const Example& ex, const Weights& w) {
  if (net.task() != TaskKind::set) throw ContractError("infer_set on a sequence-task network");
  if (!ex.is_set() || ex.features.rows() != net.feature_dim()) throw InputError("set example has wrong feature shape");
  if (ex.tgt.size() != 1) throw InputError("set example needs exactly one answer");
  const Value& table = w["inf.ans"];
  if (ex.tgt[0] >= table.shape()[0]) throw InputError("unknown answer id " + std::to_string(ex.tgt[0]));
  if (ex.src.empty()) throw InputError("empty question");
  Value q = nk::constant(Array({net.config().hidden}));
  for (std::size_t id : ex.src) {
    q = nk::gru_step(nk::embedding(w["emb.src"], id), q, w["inf.qenc.wx"], w["inf.qenc.wh"], w["inf.qenc.b"]);
  }
  const Value hy = nk::embedding(table, ex.tgt[0]);
  const Value g1 = nk::relu(nk::matmul(w["inf.V1"], hy));
  const Value g2 = nk::relu(nk::matmul(w["inf.V2"], hy));
  const Value query_part = nk::matmul(w["inf.U2"], nk::mul(q, g2));
  const Value X = nk::constant(ex.features);
  std::vector<Value> cols;
  for (std::size_t i = 0; i < ex.features.cols(); ++i) cols.push_back(nk::mul(nk::column(X, i), g1));
  const Value hidden = nk::tanh(nk::add_col(nk::matmul(w["inf.U1"], nk::stack_cols(cols)), query_part));
  Variational v;
  v.kind = net.prior();
  v.scores.push_back(nk::matmul(w["inf.u"], hidden));
  return v;
}

Variational infer(const InferenceNet& net, const Example& ex, const Weights& w) {
  return net.task() == TaskKind::set ? infer_set(net, ex, w) : infer_seq(net, ex, w);
}

Value q_log_probs(const Variational& q, std::size_t j) { return nk::log_softmax(q.scores.at(j)); }

Value q_alpha(const Variational& q, std::size_t j) {
  return nk::exp(nk::clamp(q.scores.at(j), std::log(kAlphaMin), std::log(kAlphaMax)));
}

align::CategoricalAlign q_align(const Variational& q, std::size_t j) {
  return align::CategoricalAlign(q.scores.at(j).array().storage());
}

Value elbo_nll(const Encoded& enc, const Variational& q) {
  if (q.steps() != enc.steps()) throw ContractError("variational steps do not match the encoding");
  std::vector<Value> terms;
  for (std::size_t j = 0; j < enc.steps(); ++j) {
    const Value lq = q_log_probs(q, j);
    const Value expected = nk::dot(nk::exp(lq), atom_log_likelihoods(enc, j));
    terms.push_back(nk::sub(align::categorical_kl(lq, prior_log_probs(enc, j)), expected));
  }
  return nk::add_n(terms);
}

}  // namespace laln
