// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "laln/align/rng.hpp"
#include "laln/generative/model.hpp"
#include "laln/infer/infer.hpp"
#include "laln/numkernel/params.hpp"
#include "laln/tasks/tasks.hpp"
#include "laln/varinfer/inference.hpp"

namespace laln {

enum class Objective { soft, marginal, hard_enum, hard_sample, var_enum, var_sample, var_gumbel, rws, var_dirichlet };

const std::vector<std::string>& objective_ids();
/// Throws ConfigError listing the valid ids.
Objective parse_objective(const std::string& id);
std::string objective_id(Objective o);
bool uses_inference_net(Objective o);
PriorKind objective_prior(Objective o);
/// Test-time mode matching how the objective treats the alignment.
PredictMode default_mode(Objective o);

struct AdamHyper {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::map<std::string, std::size_t> steps;
  nk::NamedArrays m, v;
};

/// Parameters without an entry in `grads` are left untouched. A non-finite
/// gradient throws NumericError naming the parameter before anything is updated.
void adam_step(const std::vector<nk::ParamPtr>& params, const nk::Gradients& grads, AdamState& state,
               const AdamHyper& hyper);
/// Rescales in place so the global norm is at most max_norm; returns the norm before clipping.
double clip_gradients(nk::Gradients& grads, double max_norm);

struct TrainConfig {
  std::string objective = "soft";
  // model
  std::size_t emb = 32, hidden = 64, att_hidden = 64, out_hidden = 64;
  std::size_t infer_hidden = 64, answer_dim = 32, gate_hidden = 64;
  double init_scale = 0.1;
  // estimators
  std::size_t samples = 1;  // score-function samples per example
  std::size_t rws_samples = 5;
  double tau = 0.5;
  bool dedup = false;
  std::string baseline = "soft";  // soft | none
  // optimisation
  AdamHyper adam;
  std::size_t batch = 6;
  std::size_t epochs = 30;
  double clip = 5.0;
  double lr_decay = 0.5;
  std::size_t decay_patience = 1;
  std::size_t early_stop = 3;  // epochs without improvement; 0 disables
  std::optional<std::size_t> pretrain_epochs;  // var-dirichlet only, default 2
  // evaluation
  std::size_t eval_samples = 10;
  std::size_t eval_every = 1;
  double divergence = 1e3;
  std::uint64_t seed = 1;
  long threads = 0;  // 0: LALN_THREADS or 1

  void validate() const;
};

inline constexpr std::size_t kDefaultPretrainEpochs = 2;

/// Unknown keys and wrong types throw ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);

struct EpochRecord {
  std::size_t epoch = 0;
  std::string phase;  // pretrain | train
  double train_loss = 0.0;  // per-token value of the optimised surrogate
  double val_nll = 0.0;
  std::optional<double> val_bound;  // Jensen or ELBO bound on the validation NLL
  double entropy_p = 0.0;
  std::optional<double> entropy_q;
  double lr = 0.0;
  double grad_norm = 0.0;  // mean pre-clip norm
  double wall_seconds = 0.0;
};

nlohmann::json to_json(const EpochRecord& r);

struct RunRecord {
  nlohmann::json config;
  std::vector<EpochRecord> epochs;
  std::string status = "incomplete";  // completed | early_stop | diverged
  std::string message;
  std::size_t best_epoch = 0;
  double best_val_nll = 0.0;
  std::vector<std::string> notes;
};

nlohmann::json summary_json(const RunRecord& r);

struct TrainedModel {
  std::unique_ptr<Model> model;
  std::unique_ptr<InferenceNet> net;
  std::vector<nk::ParamPtr> params() const;  // model then network, shared ones once
};

TrainedModel make_model(const TrainConfig& cfg, const Dataset& data);
void save_checkpoint(const std::filesystem::path& path, const TrainedModel& m);
void load_checkpoint(const std::filesystem::path& path, TrainedModel& m);

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(std::size_t epoch, std::size_t batch, double loss)> on_batch;
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  TrainedModel trained;
  RunRecord record;
};

/// Runs the configured objective. Divergence stops training with status
/// "diverged" instead of throwing. The returned parameters are those of the
/// best validation epoch.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const TrainHooks& hooks = {});

/// Per-example surrogate gradient. The rng drives any sampling in the objective.
struct StepResult {
  nk::Gradients grads;
  double loss = 0.0;
};

StepResult objective_step(Objective obj, bool pretrain, const TrainConfig& cfg, const Model& model,
                          const InferenceNet* net, const Example& ex, align::RngStream& rng);

}  // namespace laln
