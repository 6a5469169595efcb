// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include "laln/error.hpp"
#include "laln/tasks/tasks.hpp"

namespace laln {

namespace {

constexpr std::uint64_t kLexiconStream = 0x6c6578;

std::uint64_t split_stream(std::size_t split, std::size_t index) { return align::stream_id(split + 1, index); }

double entropy_of(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

std::size_t draw(const std::vector<double>& probs, align::RngStream& rng) {
  return align::cat_sample(align::CategoricalAlign::from_probs(probs), rng);
}

}  // namespace

void TaskSpec::validate() const {
  if (task != "lexicon" && task != "setquery") throw ParameterError("unknown task '" + task + "'");
  if (vocab < 2) throw ParameterError("vocabulary size must be at least 2");
  if (min_len < 1 || min_len > max_len) throw ParameterError("length range must satisfy 1 <= min_len <= max_len");
  if (!(eps >= 0.0 && eps < 1.0)) throw ParameterError("noise eps must lie in [0, 1)");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ParameterError("kappa must be positive and finite");
  if (task == "setquery" && attributes < max_len) {
    throw ParameterError("setquery needs at least max_len distinct attributes");
  }
}

Reorder parse_reorder(const std::string& s) {
  if (s == "monotone") return Reorder::monotone;
  if (s == "swap") return Reorder::swap;
  if (s == "reverse") return Reorder::reverse;
  throw ParameterError("unknown reordering '" + s + "' (monotone, swap, reverse)");
}

std::string reorder_name(Reorder r) {
  switch (r) {
    case Reorder::monotone: return "monotone";
    case Reorder::swap: return "swap";
    case Reorder::reverse: return "reverse";
  }
  return "?";
}

nlohmann::json to_json(const TaskSpec& s) {
  return {{"task", s.task},         {"vocab", s.vocab}, {"attributes", s.attributes}, {"min_len", s.min_len},
          {"max_len", s.max_len},   {"eps", s.eps},     {"kappa", s.kappa},           {"reorder", reorder_name(s.reorder)},
          {"seed", s.seed},         {"train", s.train}, {"valid", s.valid},           {"test", s.test}};
}

TaskSpec task_spec_from_json(const nlohmann::json& j) {
  TaskSpec s;
  s.task = j.value("task", s.task);
  s.vocab = j.value("vocab", s.vocab);
  s.attributes = j.value("attributes", s.attributes);
  s.min_len = j.value("min_len", s.min_len);
  s.max_len = j.value("max_len", s.max_len);
  s.eps = j.value("eps", s.eps);
  s.kappa = j.value("kappa", s.kappa);
  s.reorder = parse_reorder(j.value("reorder", std::string("monotone")));
  s.seed = j.value("seed", s.seed);
  s.train = j.value("train", s.train);
  s.valid = j.value("valid", s.valid);
  s.test = j.value("test", s.test);
  return s;
}

std::string src_word(std::size_t v) { return "s" + std::to_string(v); }
std::string tgt_word(std::size_t v) { return "t" + std::to_string(v); }

std::size_t lexicon_center(Reorder r, std::size_t t, std::size_t j) {
  switch (r) {
    case Reorder::monotone: return j;
    case Reorder::swap: return (j ^ 1U) < t ? (j ^ 1U) : j;
    case Reorder::reverse: return t - 1 - j;
  }
  return j;
}

std::vector<double> lexicon_alignment_prior(const TaskSpec& spec, std::size_t t, std::size_t j) {
  const std::size_t c = lexicon_center(spec.reorder, t, j);
  std::vector<double> p(t);
  double z = 0.0;
  const double lk = std::log(spec.kappa);
  for (std::size_t i = 0; i < t; ++i) {
    const double d = i > c ? double(i - c) : double(c - i);
    z += (p[i] = std::exp(-d * lk));
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<std::size_t> make_lexicon(const TaskSpec& spec) {
  std::vector<std::size_t> lex(spec.vocab);
  std::iota(lex.begin(), lex.end(), 0);
  align::RngStream rng(spec.seed, kLexiconStream);
  for (std::size_t i = lex.size(); i-- > 1;) std::swap(lex[i], lex[rng.below(i + 1)]);
  return lex;
}

void sample_lexicon_target(const TaskSpec& spec, const std::vector<std::size_t>& lexicon,
                           const std::vector<std::size_t>& src, align::RngStream& rng, std::vector<std::size_t>& tgt,
                           std::vector<long>& gold) {
  const std::size_t t = src.size();
  tgt.assign(t, 0);
  gold.assign(t, -1);
  for (std::size_t j = 0; j < t; ++j) {
    const std::size_t z = draw(lexicon_alignment_prior(spec, t, j), rng);
    gold[j] = static_cast<long>(z);
    const bool noise = spec.eps > 0.0 && rng.uniform() < spec.eps;
    tgt[j] = noise ? rng.below(spec.vocab) : lexicon[src[z]];
  }
}

double lexicon_entropy(const TaskSpec& spec, const std::vector<std::size_t>& lexicon,
                       const std::vector<std::size_t>& src) {
  const std::size_t t = src.size();
  double h = 0.0;
  std::vector<double> py(spec.vocab);
  for (std::size_t j = 0; j < t; ++j) {
    std::fill(py.begin(), py.end(), spec.eps / double(spec.vocab));
    const auto p = lexicon_alignment_prior(spec, t, j);
    for (std::size_t i = 0; i < t; ++i) py[lexicon[src[i]]] += (1.0 - spec.eps) * p[i];
    h += entropy_of(py);
  }
  return h;
}

double setquery_entropy(const TaskSpec& spec) {
  const double c = double(spec.vocab);
  std::vector<double> p(spec.vocab, spec.eps / c);
  p[0] += 1.0 - spec.eps;
  return entropy_of(p);
}

RawDataset gen_lexicon_task(const TaskSpec& spec) {
  spec.validate();
  if (spec.task != "lexicon") throw ParameterError("gen_lexicon_task on a '" + spec.task + "' spec");
  RawDataset out;
  out.spec = spec;
  const auto lexicon = make_lexicon(spec);
  RawSplit* splits[3] = {&out.train, &out.valid, &out.test};
  const std::size_t sizes[3] = {spec.train, spec.valid, spec.test};
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t n = 0; n < sizes[s]; ++n) {
      align::RngStream rng(spec.seed, split_stream(s, n));
      const std::size_t t = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
      std::vector<std::size_t> src(t), tgt;
      for (auto& v : src) v = rng.below(spec.vocab);
      RawExample ex;
      sample_lexicon_target(spec, lexicon, src, rng, tgt, ex.gold);
      for (std::size_t v : src) ex.src.push_back(src_word(v));
      for (std::size_t v : tgt) ex.tgt.push_back(tgt_word(v));
      splits[s]->entropy += lexicon_entropy(spec, lexicon, src);
      splits[s]->tokens += t + 1;
      splits[s]->examples.push_back(std::move(ex));
    }
  }
  return out;
}

RawDataset gen_setquery_task(const TaskSpec& spec) {
  spec.validate();
  if (spec.task != "setquery") throw ParameterError("gen_setquery_task on a '" + spec.task + "' spec");
  RawDataset out;
  out.spec = spec;
  const std::size_t f = spec.vocab + spec.attributes;
  const double h = setquery_entropy(spec);
  RawSplit* splits[3] = {&out.train, &out.valid, &out.test};
  const std::size_t sizes[3] = {spec.train, spec.valid, spec.test};
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t n = 0; n < sizes[s]; ++n) {
      align::RngStream rng(spec.seed, split_stream(s, n));
      const std::size_t t = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
      std::vector<std::size_t> attrs(spec.attributes);
      std::iota(attrs.begin(), attrs.end(), 0);
      for (std::size_t i = 0; i < t; ++i) std::swap(attrs[i], attrs[i + rng.below(attrs.size() - i)]);
      RawExample ex;
      ex.features = nk::Array({f, t});
      std::vector<std::size_t> classes(t);
      for (std::size_t i = 0; i < t; ++i) {
        classes[i] = rng.below(spec.vocab);
        ex.features.at(classes[i], i) = 1.0;
        ex.features.at(spec.vocab + attrs[i], i) = 1.0;
      }
      const std::size_t g = rng.below(t);
      const bool noise = spec.eps > 0.0 && rng.uniform() < spec.eps;
      const std::size_t label = noise ? rng.below(spec.vocab) : classes[g];
      ex.src = {"what", "a" + std::to_string(attrs[g])};
      ex.tgt = {"c" + std::to_string(label)};
      ex.gold = {static_cast<long>(g)};
      splits[s]->entropy += h;
      splits[s]->tokens += 1;
      splits[s]->examples.push_back(std::move(ex));
    }
  }
  return out;
}

RawDataset generate(const TaskSpec& spec) {
  return spec.task == "setquery" ? gen_setquery_task(spec) : gen_lexicon_task(spec);
}

}  // namespace laln
