// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/train/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "laln/error.hpp"
#include "laln/generative/hard.hpp"
#include "laln/numkernel/archive.hpp"
#include "laln/numkernel/ops.hpp"
#include "laln/parallel.hpp"
#include "laln/varinfer/estimators.hpp"

namespace laln {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kExampleStream = 0x65786d70;

const std::vector<std::pair<std::string, Objective>>& catalog() {
  static const std::vector<std::pair<std::string, Objective>> c{
      {"soft", Objective::soft},           {"marginal", Objective::marginal},
      {"hard-enum", Objective::hard_enum}, {"hard-sample", Objective::hard_sample},
      {"var-enum", Objective::var_enum},   {"var-sample", Objective::var_sample},
      {"var-gumbel", Objective::var_gumbel}, {"rws", Objective::rws},
      {"var-dirichlet", Objective::var_dirichlet}};
  return c;
}

std::string joined_ids() {
  std::string s;
  for (const auto& id : objective_ids()) s += (s.empty() ? "" : ", ") + id;
  return s;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nk::Value mean_of(const std::vector<nk::Value>& xs) { return nk::scale(nk::add_n(xs), 1.0 / double(xs.size())); }

}  // namespace

const std::vector<std::string>& objective_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const auto& [id, o] : catalog()) v.push_back(id);
    return v;
  }();
  return ids;
}

Objective parse_objective(const std::string& id) {
  for (const auto& [name, o] : catalog())
    if (name == id) return o;
  throw ConfigError("unknown objective '" + id + "'; valid objectives: " + joined_ids());
}

std::string objective_id(Objective o) {
  for (const auto& [name, x] : catalog())
    if (x == o) return name;
  return "?";
}

bool uses_inference_net(Objective o) {
  return o == Objective::var_enum || o == Objective::var_sample || o == Objective::var_gumbel ||
         o == Objective::rws || o == Objective::var_dirichlet;
}

PriorKind objective_prior(Objective o) {
  return o == Objective::var_dirichlet ? PriorKind::dirichlet : PriorKind::categorical;
}

PredictMode default_mode(Objective o) {
  if (o == Objective::soft) return PredictMode::soft;
  if (o == Objective::var_dirichlet) return PredictMode::sample;
  return PredictMode::exact;
}

void adam_step(const std::vector<nk::ParamPtr>& params, const nk::Gradients& grads, AdamState& state,
               const AdamHyper& hyper) {
  for (const auto& p : params) {
    auto it = grads.find(p->name);
    if (it == grads.end()) continue;
    if (it->second.shape() != p->value.shape()) {
      throw ShapeError("gradient for " + p->name + " has shape " + nk::shape_str(it->second.shape()) +
                       ", expected " + nk::shape_str(p->value.shape()));
    }
    if (!it->second.all_finite()) throw NumericError("non-finite gradient in parameter " + p->name);
  }
  for (const auto& p : params) {
    auto it = grads.find(p->name);
    if (it == grads.end()) continue;
    const nk::Array& g = it->second;
    auto [mit, fresh] = state.m.try_emplace(p->name, nk::Array::zeros_like(p->value));
    nk::Array& m = mit->second;
    nk::Array& v = state.v.try_emplace(p->name, nk::Array::zeros_like(p->value)).first->second;
    const std::size_t t = ++state.steps[p->name];
    const double c1 = 1.0 - std::pow(hyper.beta1, double(t));
    const double c2 = 1.0 - std::pow(hyper.beta2, double(t));
    nk::Array& w = p->value;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      w[i] -= hyper.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + hyper.eps);
    }
  }
}

double clip_gradients(nk::Gradients& grads, double max_norm) {
  const double norm = nk::global_norm(grads);
  if (norm > max_norm && std::isfinite(norm)) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads) g *= s;
  }
  return norm;
}

void TrainConfig::validate() const {
  parse_objective(objective);
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
  };
  auto at_least = [](std::size_t v, std::size_t lo, const char* what) {
    if (v < lo) throw ConfigError(std::string(what) + " must be at least " + std::to_string(lo));
  };
  at_least(emb, 1, "emb");
  at_least(hidden, 1, "hidden");
  at_least(att_hidden, 1, "att_hidden");
  at_least(out_hidden, 1, "out_hidden");
  at_least(infer_hidden, 1, "infer_hidden");
  at_least(answer_dim, 1, "answer_dim");
  at_least(gate_hidden, 1, "gate_hidden");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ConfigError("init_scale must be >= 0");
  at_least(samples, 1, "samples");
  at_least(rws_samples, 2, "rws_samples");
  positive(tau, "tau");
  if (baseline != "soft" && baseline != "none") throw ConfigError("baseline must be 'soft' or 'none'");
  positive(adam.lr, "lr");
  positive(adam.eps, "adam_eps");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)");
  at_least(batch, 1, "batch");
  at_least(epochs, 1, "epochs");
  positive(clip, "clip");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  at_least(decay_patience, 1, "decay_patience");
  at_least(eval_samples, 1, "eval_samples");
  at_least(eval_every, 1, "eval_every");
  positive(divergence, "divergence");
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  TrainConfig c;
  static const std::set<std::string> known{
      "objective",  "emb",        "hidden",       "att_hidden",  "out_hidden",     "infer_hidden",
      "answer_dim", "gate_hidden", "init_scale",  "samples",     "rws_samples",    "tau",
      "dedup",      "baseline",   "lr",           "beta1",       "beta2",          "adam_eps",
      "batch",      "epochs",     "clip",         "lr_decay",    "decay_patience", "early_stop",
      "pretrain_epochs", "eval_samples", "eval_every", "divergence", "seed",       "threads"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  try {
    c.objective = j.value("objective", c.objective);
    c.emb = j.value("emb", c.emb);
    c.hidden = j.value("hidden", c.hidden);
    c.att_hidden = j.value("att_hidden", c.att_hidden);
    c.out_hidden = j.value("out_hidden", c.out_hidden);
    c.infer_hidden = j.value("infer_hidden", c.infer_hidden);
    c.answer_dim = j.value("answer_dim", c.answer_dim);
    c.gate_hidden = j.value("gate_hidden", c.gate_hidden);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.samples = j.value("samples", c.samples);
    c.rws_samples = j.value("rws_samples", c.rws_samples);
    c.tau = j.value("tau", c.tau);
    c.dedup = j.value("dedup", c.dedup);
    c.baseline = j.value("baseline", c.baseline);
    c.adam.lr = j.value("lr", c.adam.lr);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.eps = j.value("adam_eps", c.adam.eps);
    c.batch = j.value("batch", c.batch);
    c.epochs = j.value("epochs", c.epochs);
    c.clip = j.value("clip", c.clip);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.decay_patience = j.value("decay_patience", c.decay_patience);
    c.early_stop = j.value("early_stop", c.early_stop);
    if (j.contains("pretrain_epochs") && !j["pretrain_epochs"].is_null()) {
      c.pretrain_epochs = j["pretrain_epochs"].get<std::size_t>();
    }
    c.eval_samples = j.value("eval_samples", c.eval_samples);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.divergence = j.value("divergence", c.divergence);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j{{"objective", c.objective},
                   {"emb", c.emb},
                   {"hidden", c.hidden},
                   {"att_hidden", c.att_hidden},
                   {"out_hidden", c.out_hidden},
                   {"infer_hidden", c.infer_hidden},
                   {"answer_dim", c.answer_dim},
                   {"gate_hidden", c.gate_hidden},
                   {"init_scale", c.init_scale},
                   {"samples", c.samples},
                   {"rws_samples", c.rws_samples},
                   {"tau", c.tau},
                   {"dedup", c.dedup},
                   {"baseline", c.baseline},
                   {"lr", c.adam.lr},
                   {"beta1", c.adam.beta1},
                   {"beta2", c.adam.beta2},
                   {"adam_eps", c.adam.eps},
                   {"batch", c.batch},
                   {"epochs", c.epochs},
                   {"clip", c.clip},
                   {"lr_decay", c.lr_decay},
                   {"decay_patience", c.decay_patience},
                   {"early_stop", c.early_stop},
                   {"eval_samples", c.eval_samples},
                   {"eval_every", c.eval_every},
                   {"divergence", c.divergence},
                   {"seed", c.seed},
                   {"threads", c.threads}};
  j["pretrain_epochs"] = c.pretrain_epochs ? nlohmann::json(*c.pretrain_epochs) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"phase", r.phase},
          {"train_loss", r.train_loss},
          {"val_nll", r.val_nll},
          {"val_bound", optional_json(r.val_bound)},
          {"entropy_p", r.entropy_p},
          {"entropy_q", optional_json(r.entropy_q)},
          {"lr", r.lr},
          {"grad_norm", r.grad_norm},
          {"wall_seconds", r.wall_seconds}};
}

nlohmann::json summary_json(const RunRecord& r) {
  return {{"status", r.status},   {"message", r.message}, {"best_epoch", r.best_epoch},
          {"best_val_nll", r.best_val_nll}, {"epochs", r.epochs.size()}, {"notes", r.notes},
          {"config", r.config}};
}

std::vector<nk::ParamPtr> TrainedModel::params() const {
  std::vector<nk::ParamPtr> out = model->params().params();
  if (net) {
    std::set<std::string> seen;
    for (const auto& p : out) seen.insert(p->name);
    for (const auto& p : net->params().params())
      if (!seen.count(p->name)) out.push_back(p);
  }
  return out;
}

TrainedModel make_model(const TrainConfig& cfg, const Dataset& data) {
  const Objective obj = parse_objective(cfg.objective);
  ModelConfig mc;
  mc.task = data.task;
  mc.prior = objective_prior(obj);
  mc.src_vocab = data.src.size();
  mc.tgt_vocab = data.tgt.size();
  mc.feature_dim = data.feature_dim;
  mc.emb = cfg.emb;
  mc.hidden = cfg.hidden;
  mc.att_hidden = cfg.att_hidden;
  mc.out_hidden = cfg.out_hidden;
  mc.init_scale = cfg.init_scale;
  TrainedModel t;
  t.model = std::make_unique<Model>(mc, cfg.seed);
  if (uses_inference_net(obj)) {
    InferConfig ic;
    ic.hidden = cfg.infer_hidden;
    ic.answer_dim = cfg.answer_dim;
    ic.gate_hidden = cfg.gate_hidden;
    ic.init_scale = cfg.init_scale;
    t.net = std::make_unique<InferenceNet>(ic, *t.model, cfg.seed + 1);
  }
  return t;
}

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& m) {
  nk::NamedArrays all;
  for (const auto& p : m.params()) all.emplace(p->name, p->value);
  nk::save_archive(path, all);
}

void load_checkpoint(const std::filesystem::path& path, TrainedModel& m) {
  const nk::NamedArrays all = nk::load_archive(path);
  m.model->params().load_named(all);
  if (m.net) m.net->params().load_named(all);
}

StepResult objective_step(Objective obj, bool pretrain, const TrainConfig& cfg, const Model& model,
                          const InferenceNet* net, const Example& ex, align::RngStream& rng) {
  nk::Binding b;
  const Encoded enc = encode(model, ex, bind_weights(model.params(), b));
  Variational q;
  const bool with_q = uses_inference_net(obj) && !pretrain;
  if (with_q) {
    if (!net) throw ContractError("objective " + objective_id(obj) + " needs an inference network");
    q = infer(*net, ex, bind_weights(net->params(), b));
  }
  EstimatorOptions opts;
  opts.baseline = cfg.baseline == "none" ? BaselineKind::none : BaselineKind::soft;

  nk::Value loss;
  switch (obj) {
    case Objective::soft: loss = soft_nll(enc); break;
    case Objective::marginal: loss = exact_marginal_nll(enc); break;
    case Objective::hard_enum: loss = jensen_nll(enc); break;
    case Objective::hard_sample: {
      const ScorePieces pieces = hard_pieces(enc, opts);
      std::vector<nk::Value> draws;
      for (std::size_t s = 0; s < cfg.samples; ++s) draws.push_back(hard_surrogate(pieces, &rng));
      loss = mean_of(draws);
      break;
    }
    case Objective::var_enum: loss = elbo_nll(enc, q); break;
    case Objective::var_sample: {
      const auto base = baselines(enc, opts);
      std::vector<nk::Value> draws;
      for (std::size_t s = 0; s < cfg.samples; ++s) draws.push_back(variational_cat_surrogate(enc, q, base, &rng));
      loss = mean_of(draws);
      break;
    }
    case Objective::var_gumbel: {
      std::vector<nk::Value> draws;
      for (std::size_t s = 0; s < cfg.samples; ++s) draws.push_back(variational_gumbel_surrogate(enc, q, cfg.tau, rng));
      loss = mean_of(draws);
      break;
    }
    case Objective::rws: loss = rws_surrogate(enc, q, cfg.rws_samples, cfg.dedup, rng); break;
    case Objective::var_dirichlet: {
      const GammaDraw draw = rng_gamma_draw(rng);
      loss = pretrain ? dirichlet_jensen_loss(enc, draw) : dirichlet_elbo_loss(enc, q, draw);
      break;
    }
  }
  nk::backward(loss);
  return {b.gradients(), loss.item()};
}

namespace {

struct ValidationResult {
  double nll = 0.0;
  std::optional<double> bound;
  EntropyReport entropy;
};

ValidationResult validate_epoch(Objective obj, bool pretrain, const TrainConfig& cfg, const TrainedModel& tm,
                                std::span<const Example> data, std::size_t threads) {
  DecodeConfig dc;
  dc.mode = default_mode(obj);
  dc.S = cfg.eval_samples;
  dc.seed = cfg.seed;
  const InferenceNet* net = pretrain ? nullptr : tm.net.get();
  ValidationResult r;
  r.nll = predictive_nll(*tm.model, data, dc, threads).per_token();
  r.entropy = entropy_report(*tm.model, net, data, threads);
  const bool jensen = obj == Objective::hard_enum || obj == Objective::hard_sample;
  const bool elbo = !pretrain && net && net->prior() == PriorKind::categorical;
  if (jensen || elbo) {
    std::vector<double> bound(data.size());
    parallel_for(data.size(), threads, [&](std::size_t n) {
      nk::Binding b(false);
      const Encoded enc = encode(*tm.model, data[n], bind_weights(tm.model->params(), b));
      bound[n] = jensen ? jensen_nll(enc).item()
                        : elbo_nll(enc, infer(*net, data[n], bind_weights(net->params(), b))).item();
    });
    std::size_t tokens = 0;
    for (const auto& ex : data) tokens += ex.steps();
    r.bound = std::accumulate(bound.begin(), bound.end(), 0.0) / double(std::max<std::size_t>(tokens, 1));
  }
  return r;
}

}  // namespace

TrainResult train(const TrainConfig& cfg_in, const Dataset& data, const TrainHooks& hooks) {
  cfg_in.validate();
  if (data.train.empty()) throw InputError("training split is empty");
  TrainConfig cfg = cfg_in;
  const Objective obj = parse_objective(cfg.objective);
  auto log = [&](const std::string& msg, RunRecord& rec) {
    rec.notes.push_back(msg);
    if (hooks.log) hooks.log(msg);
  };

  TrainResult result;
  RunRecord& rec = result.record;
  std::size_t pretrain_epochs = 0;
  if (obj == Objective::var_dirichlet) {
    if (!cfg.pretrain_epochs) {
      cfg.pretrain_epochs = kDefaultPretrainEpochs;
      log("pretrain_epochs not set; using default " + std::to_string(kDefaultPretrainEpochs), rec);
    }
    pretrain_epochs = *cfg.pretrain_epochs;
  }
  rec.config = to_json(cfg);
  result.trained = make_model(cfg, data);
  TrainedModel& tm = result.trained;
  const std::size_t threads = resolve_threads(cfg.threads);
  const std::span<const Example> valid =
      data.valid.empty() ? std::span<const Example>(data.train) : std::span<const Example>(data.valid);
  if (data.valid.empty()) log("no validation split; validating on the training split", rec);

  const std::vector<nk::ParamPtr> all_params = tm.params();
  const std::vector<nk::ParamPtr> model_params = tm.model->params().params();
  AdamState state;
  AdamHyper hyper = cfg.adam;
  std::optional<nk::NamedArrays> best;
  std::size_t since_best = 0, since_decay = 0;
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = data.train.size();
  const std::size_t total_epochs = pretrain_epochs + cfg.epochs;

  auto snapshot = [&] {
    nk::NamedArrays s;
    for (const auto& p : all_params) s.emplace(p->name, p->value);
    return s;
  };
  auto diverge = [&](const std::string& why) {
    rec.status = "diverged";
    rec.message = why;
    log("diverged: " + why, rec);
  };

  for (std::size_t epoch = 1; epoch <= total_epochs && rec.status == "incomplete"; ++epoch) {
    const bool pretrain = epoch <= pretrain_epochs;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    align::RngStream shuffle(cfg.seed, align::stream_id(kShuffleStream, epoch));
    for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[shuffle.below(i + 1)]);

    double loss_sum = 0.0, norm_sum = 0.0;
    std::size_t token_sum = 0, batches = 0;
    for (std::size_t start_idx = 0; start_idx < n; start_idx += cfg.batch) {
      const std::size_t size = std::min(cfg.batch, n - start_idx);
      std::vector<StepResult> steps(size);
      parallel_for(size, threads, [&](std::size_t k) {
        const std::size_t idx = order[start_idx + k];
        align::RngStream rng(cfg.seed, align::stream_id(kExampleStream, epoch, idx));
        steps[k] = objective_step(obj, pretrain, cfg, *tm.model, tm.net.get(), data.train[idx], rng);
      });
      nk::Gradients grads;
      double loss = 0.0;
      std::size_t tokens = 0;
      for (std::size_t k = 0; k < size; ++k) {
        nk::accumulate(grads, steps[k].grads);
        loss += steps[k].loss;
        tokens += data.train[order[start_idx + k]].steps();
      }
      if (!std::isfinite(loss)) {
        diverge("non-finite training loss in epoch " + std::to_string(epoch));
        break;
      }
      for (auto& [name, g] : grads) g *= 1.0 / double(tokens);
      norm_sum += clip_gradients(grads, cfg.clip);
      try {
        adam_step(pretrain ? model_params : all_params, grads, state, hyper);
      } catch (const NumericError& e) {
        diverge(e.what());
        break;
      }
      loss_sum += loss;
      token_sum += tokens;
      ++batches;
      if (hooks.on_batch) hooks.on_batch(epoch, batches - 1, loss / double(tokens));
    }
    if (rec.status != "incomplete") break;

    if (epoch % cfg.eval_every != 0 && epoch != total_epochs) continue;
    const ValidationResult v = validate_epoch(obj, pretrain, cfg, tm, valid, threads);
    EpochRecord er;
    er.epoch = epoch;
    er.phase = pretrain ? "pretrain" : "train";
    er.train_loss = loss_sum / double(std::max<std::size_t>(token_sum, 1));
    er.val_nll = v.nll;
    er.val_bound = v.bound;
    er.entropy_p = v.entropy.prior;
    er.entropy_q = v.entropy.posterior;
    er.lr = hyper.lr;
    er.grad_norm = norm_sum / double(std::max<std::size_t>(batches, 1));
    er.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.epochs.push_back(er);
    if (hooks.on_epoch) hooks.on_epoch(er);

    if (!std::isfinite(v.nll) || v.nll > cfg.divergence) {
      diverge("validation NLL " + std::to_string(v.nll) + " in epoch " + std::to_string(epoch));
      break;
    }
    if (pretrain) continue;
    if (!best || v.nll < rec.best_val_nll) {
      best = snapshot();
      rec.best_epoch = epoch;
      rec.best_val_nll = v.nll;
      since_best = since_decay = 0;
      continue;
    }
    ++since_best;
    if (++since_decay >= cfg.decay_patience && cfg.lr_decay < 1.0) {
      hyper.lr *= cfg.lr_decay;
      since_decay = 0;
      log("epoch " + std::to_string(epoch) + ": validation NLL did not improve; lr -> " + std::to_string(hyper.lr),
          rec);
    }
    if (cfg.early_stop > 0 && since_best >= cfg.early_stop) {
      rec.status = "early_stop";
      log("early stop after epoch " + std::to_string(epoch), rec);
    }
  }
  if (rec.status == "incomplete") rec.status = "completed";
  if (best) {
    for (const auto& p : all_params) p->value = best->at(p->name);
  }
  return result;
}

}  // namespace laln
