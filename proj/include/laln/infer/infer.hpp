// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "laln/align/rng.hpp"
#include "laln/example.hpp"
#include "laln/generative/model.hpp"
#include "laln/varinfer/inference.hpp"

namespace laln {

/// How the alignment is integrated out at test time. `soft` feeds the mean
/// alignment through the predictor once.
enum class PredictMode { exact, kmax, sample, soft };

PredictMode parse_mode(const std::string& s);
std::string mode_name(PredictMode m);

struct DecodeConfig {
  PredictMode mode = PredictMode::exact;
  std::size_t K = 5;
  std::size_t S = 10;  // Dirichlet draws per step in sample mode
  std::size_t beam = 10;
  double alpha = 1.0;  // length-penalty exponent
  std::uint64_t seed = 1;
  std::size_t max_extra = 10;  // decoded length is capped at 2 * source length + max_extra
  void validate() const;
};

// Mean alignment of each step as plain probabilities.
std::vector<double> prior_mean_probs(const Encoded& enc, std::size_t j);
std::vector<double> q_mean_probs(const Variational& q, std::size_t j);

/// Log predictive distribution over the output vocabulary at step j.
nk::Array step_log_predictive(const Encoded& enc, std::size_t j, const DecodeConfig& cfg, align::RngStream& rng);

/// Per-step log p(y_j | x, y_<j) under cfg.mode; `index` selects the sampling stream.
std::vector<double> example_log_likelihoods(const Model& model, const Example& ex, const DecodeConfig& cfg,
                                            std::size_t index = 0);

struct NllResult {
  double nll = 0.0;  // summed over tokens
  std::size_t tokens = 0;
  std::size_t examples = 0;
  double per_token() const { return tokens ? nll / double(tokens) : 0.0; }
  double ppl() const;
};

NllResult predictive_nll(const Model& model, std::span<const Example> data, const DecodeConfig& cfg,
                         std::size_t threads = 1);

double length_penalty(std::size_t len, double alpha);

struct Hypothesis {
  std::vector<std::size_t> tokens;  // ends with eos when finished
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / length_penalty
  bool finished = false;
};

/// Ranked by score, best first.
std::vector<Hypothesis> beam_search(const Model& model, const std::vector<std::size_t>& src, const DecodeConfig& cfg);
/// Best hypothesis without its eos.
std::vector<std::size_t> beam_decode(const Model& model, const std::vector<std::size_t>& src, const DecodeConfig& cfg);
std::vector<std::size_t> greedy_decode(const Model& model, const std::vector<std::size_t>& src,
                                       const DecodeConfig& cfg);

struct EntropyReport {
  double prior = 0.0;
  std::optional<double> posterior;
  std::size_t steps = 0;
};

EntropyReport entropy_report(const Model& model, const InferenceNet* net, std::span<const Example> data,
                             std::size_t threads = 1);

struct AccuracyReport {
  double prior = 0.0;
  double posterior = 0.0;  // equals prior without an inference network
  std::size_t steps = 0;
};

/// Steps whose gold index is negative are skipped. Throws InputError when no step has gold.
AccuracyReport alignment_accuracy(const Model& model, const InferenceNet* net, std::span<const Example> data,
                                  std::size_t threads = 1);

struct AlignmentReport {
  std::vector<std::vector<double>> prior;  // rows are output steps
  std::vector<std::vector<double>> posterior;
  std::vector<double> prior_entropy;
  std::vector<double> posterior_entropy;
};

AlignmentReport alignment_report(const Model& model, const InferenceNet* net, const Example& ex);

/// Probabilities with six decimals; each row is rounded so that it sums to exactly one.
std::string format_tsv(const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> read_tsv(const std::filesystem::path& path);
/// Writes p.tsv, and q.tsv when `net` is given, under `dir`. Returns the files written.
std::vector<std::filesystem::path> export_alignments(const Model& model, const InferenceNet* net, const Example& ex,
                                                     const std::filesystem::path& dir);

struct Metrics {
  NllResult nll;
  EntropyReport entropy;
  std::optional<AccuracyReport> accuracy;
  PredictMode mode = PredictMode::exact;
  std::size_t K = 0;
};

Metrics evaluate(const Model& model, const InferenceNet* net, std::span<const Example> data, const DecodeConfig& cfg,
                 std::size_t threads = 1);
nlohmann::json to_json(const Metrics& m);

}  // namespace laln
