// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "laln/align/rng.hpp"
#include "laln/example.hpp"
#include "laln/generative/model.hpp"
#include "laln/tasks/vocab.hpp"

namespace laln {

enum class Reorder { monotone, swap, reverse };

struct TaskSpec {
  std::string task = "lexicon";  // lexicon | setquery
  std::size_t vocab = 50;        // content words (lexicon) or classes (setquery)
  std::size_t attributes = 12;   // setquery attribute count, >= max_len
  std::size_t min_len = 3;
  std::size_t max_len = 10;
  double eps = 0.1;
  double kappa = 8.0;
  Reorder reorder = Reorder::monotone;
  std::uint64_t seed = 1;
  std::size_t train = 5000;
  std::size_t valid = 500;
  std::size_t test = 500;

  void validate() const;
};

nlohmann::json to_json(const TaskSpec& s);
TaskSpec task_spec_from_json(const nlohmann::json& j);
Reorder parse_reorder(const std::string& s);
std::string reorder_name(Reorder r);

/// Example as tokens, before vocabulary mapping. Sequence targets exclude
/// <eos>; set examples keep the question in `src` and the answer in `tgt`.
struct RawExample {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  std::vector<long> gold;
  nk::Array features;  // (F, T) for set tasks
};

struct RawSplit {
  std::vector<RawExample> examples;
  double entropy = 0.0;    // sum over examples of H(y | x), nats
  std::size_t tokens = 0;  // scored output tokens, <eos> included
};

struct RawDataset {
  TaskSpec spec;
  RawSplit train, valid, test;
};

/// Source-position distribution at target step j of a length-t sequence:
/// p(i) proportional to kappa^-|i - center(j)|.
std::vector<double> lexicon_alignment_prior(const TaskSpec& spec, std::size_t t, std::size_t j);
std::size_t lexicon_center(Reorder r, std::size_t t, std::size_t j);

/// Random bijection from source content words to target content words.
std::vector<std::size_t> make_lexicon(const TaskSpec& spec);

// Draw gold alignments and targets for a fixed source (content indices).
void sample_lexicon_target(const TaskSpec& spec, const std::vector<std::size_t>& lexicon,
                           const std::vector<std::size_t>& src, align::RngStream& rng,
                           std::vector<std::size_t>& tgt, std::vector<long>& gold);
/// Exact sum over target steps of H(y_j | x).
double lexicon_entropy(const TaskSpec& spec, const std::vector<std::size_t>& lexicon,
                       const std::vector<std::size_t>& src);
double setquery_entropy(const TaskSpec& spec);

RawDataset gen_lexicon_task(const TaskSpec& spec);
RawDataset gen_setquery_task(const TaskSpec& spec);
RawDataset generate(const TaskSpec& spec);

std::string src_word(std::size_t v);
std::string tgt_word(std::size_t v);

struct LoadOptions {
  std::size_t cutoff = 1;     // minimum training count for a vocabulary entry
  std::size_t max_len = 125;  // longer pairs are dropped
};

struct Dataset {
  TaskKind task = TaskKind::sequence;
  Vocab src, tgt;
  std::size_t feature_dim = 0;
  std::vector<Example> train, valid, test;
  nlohmann::json meta;  // generator metadata when available
};

struct ParallelData {
  Vocab src, tgt;
  std::vector<Example> examples;
  std::size_t dropped = 0;
};

/// Reads whitespace-tokenised parallel text, one sentence per line, with an
/// optional alignment file of 0-based "i-j" pairs. An empty `align` path
/// yields examples without gold.
std::vector<RawExample> read_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt,
                                      const std::filesystem::path& align = {});
ParallelData load_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt,
                           const std::filesystem::path& align = {}, const LoadOptions& opts = {});

/// Vocabularies from the training split, then id-mapped splits.
Dataset build_dataset(const RawDataset& raw, const LoadOptions& opts = {});
nlohmann::json dataset_meta(const RawDataset& raw);

void write_dataset(const RawDataset& raw, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& opts = {});

}  // namespace laln
