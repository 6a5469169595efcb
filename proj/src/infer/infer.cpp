// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/infer/infer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "laln/align/categorical.hpp"
#include "laln/align/dirichlet.hpp"
#include "laln/error.hpp"
#include "laln/numkernel/ops.hpp"
#include "laln/parallel.hpp"

namespace laln {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kPredictStream = 0x70726564;
constexpr std::uint64_t kBeamStream = 0x6265616d;

double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double entropy_of(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

std::size_t argmax_of(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

struct Bound {
  nk::Binding binding{false};
  Encoded enc;
  std::optional<Variational> q;
};

void bind(Bound& b, const Model& model, const InferenceNet* net, const Example& ex) {
  b.enc = encode(model, ex, bind_weights(model.params(), b.binding));
  if (net) b.q = infer(*net, ex, bind_weights(net->params(), b.binding));
}

}  // namespace

PredictMode parse_mode(const std::string& s) {
  if (s == "exact") return PredictMode::exact;
  if (s == "kmax") return PredictMode::kmax;
  if (s == "sample") return PredictMode::sample;
  if (s == "soft") return PredictMode::soft;
  throw ConfigError("unknown mode '" + s + "' (exact, kmax, sample, soft)");
}

std::string mode_name(PredictMode m) {
  switch (m) {
    case PredictMode::exact: return "exact";
    case PredictMode::kmax: return "kmax";
    case PredictMode::sample: return "sample";
    case PredictMode::soft: return "soft";
  }
  return "?";
}

void DecodeConfig::validate() const {
  if (K < 1) throw ConfigError("K must be at least 1");
  if (S < 1) throw ConfigError("S must be at least 1");
  if (beam < 1) throw ConfigError("beam size must be at least 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("length-penalty alpha must be >= 0");
}

std::vector<double> prior_mean_probs(const Encoded& enc, std::size_t j) {
  return enc.prior_mean.at(j).array().storage();
}

std::vector<double> q_mean_probs(const Variational& q, std::size_t j) {
  if (q.kind == PriorKind::categorical) return q_align(q, j).probs();
  return align::DirichletAlign(q_alpha(q, j).array().storage()).mean();
}

nk::Array step_log_predictive(const Encoded& enc, std::size_t j, const DecodeConfig& cfg, align::RngStream& rng) {
  switch (cfg.mode) {
    case PredictMode::soft: return predict(enc, j, enc.prior_mean.at(j)).array();
    case PredictMode::exact:
    case PredictMode::kmax: {
      if (enc.prior != PriorKind::categorical) {
        throw ConfigError("mode " + mode_name(cfg.mode) + " enumerates a categorical alignment; use sample or soft");
      }
      align::CategoricalAlign p = prior_align(enc, j);
      if (cfg.mode == PredictMode::kmax) p = align::kmax_renormalize(p, std::min(cfg.K, p.size()));
      const nk::Array atoms = atom_log_probs(enc, j).array();
      const std::size_t V = atoms.rows(), T = atoms.cols();
      nk::Array out({V});
      std::vector<double> terms;
      for (std::size_t v = 0; v < V; ++v) {
        terms.clear();
        for (std::size_t i = 0; i < T; ++i)
          if (p.probs()[i] > 0.0) terms.push_back(std::log(p.probs()[i]) + atoms.at(v, i));
        out[v] = log_sum_exp(terms);
      }
      return out;
    }
    case PredictMode::sample: {
      if (enc.prior != PriorKind::dirichlet) {
        throw ConfigError("mode sample needs a Dirichlet alignment model; enumeration is exact for categorical ones");
      }
      const align::DirichletAlign d(prior_alpha(enc, j).array().storage());
      std::vector<nk::Array> draws;
      for (std::size_t s = 0; s < cfg.S; ++s) {
        draws.push_back(predict(enc, j, nk::constant(nk::Array::vector(align::dir_sample(d, rng)))).array());
      }
      nk::Array out({draws[0].size()});
      std::vector<double> terms(cfg.S);
      for (std::size_t v = 0; v < out.size(); ++v) {
        for (std::size_t s = 0; s < cfg.S; ++s) terms[s] = draws[s][v];
        out[v] = log_sum_exp(terms) - std::log(double(cfg.S));
      }
      return out;
    }
  }
  throw ContractError("unhandled predictive mode");
}

std::vector<double> example_log_likelihoods(const Model& model, const Example& ex, const DecodeConfig& cfg,
                                            std::size_t index) {
  nk::Binding b(false);
  const Encoded enc = encode(model, ex, bind_weights(model.params(), b));
  align::RngStream rng(cfg.seed, align::stream_id(kPredictStream, index));
  std::vector<double> out;
  for (std::size_t j = 0; j < enc.steps(); ++j) out.push_back(step_log_predictive(enc, j, cfg, rng)[enc.targets[j]]);
  return out;
}

double NllResult::ppl() const { return std::exp(per_token()); }

NllResult predictive_nll(const Model& model, std::span<const Example> data, const DecodeConfig& cfg,
                         std::size_t threads) {
  cfg.validate();
  std::vector<double> nll(data.size());
  parallel_for(data.size(), threads, [&](std::size_t n) {
    double s = 0.0;
    for (double lp : example_log_likelihoods(model, data[n], cfg, n)) s -= lp;
    nll[n] = s;
  });
  NllResult r;
  for (std::size_t n = 0; n < data.size(); ++n) {
    r.nll += nll[n];
    r.tokens += data[n].steps();
  }
  r.examples = data.size();
  return r;
}

double length_penalty(std::size_t len, double alpha) { return std::pow((5.0 + double(len)) / 6.0, alpha); }

std::vector<Hypothesis> beam_search(const Model& model, const std::vector<std::size_t>& src, const DecodeConfig& cfg) {
  cfg.validate();
  struct Live {
    Encoded enc;
    DecoderState state;
    std::vector<std::size_t> tokens;
    double log_prob;
  };
  struct Candidate {
    std::size_t parent, token;
    double log_prob;
  };
  nk::Binding b(false);
  const Weights w = bind_weights(model.params(), b);
  std::vector<Live> live{{encode_source(model, src, w), decoder_start(model), {}, 0.0}};
  align::RngStream rng(cfg.seed, align::stream_id(kBeamStream));
  const std::size_t max_len = 2 * src.size() + cfg.max_extra;
  std::vector<Hypothesis> finished;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < live.size(); ++h) {
      Live& l = live[h];
      decoder_step(l.enc, l.state);
      const nk::Array lp = step_log_predictive(l.enc, l.enc.steps() - 1, cfg, rng);
      for (std::size_t v = 0; v < lp.size(); ++v) cands.push_back({h, v, l.log_prob + lp[v]});
    }
    const std::size_t keep = std::min(cfg.beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& c) {
                        if (a.log_prob != c.log_prob) return a.log_prob > c.log_prob;
                        return a.parent != c.parent ? a.parent < c.parent : a.token < c.token;
                      });
    std::vector<Live> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = cands[k];
      std::vector<std::size_t> tokens = live[c.parent].tokens;
      tokens.push_back(c.token);
      const bool eos = c.token == kEos;
      if (eos || step + 1 == max_len) {
        finished.push_back({tokens, c.log_prob, c.log_prob / length_penalty(tokens.size(), cfg.alpha), eos});
      } else {
        Live l = live[c.parent];
        l.state.prev = c.token;
        l.tokens = std::move(tokens);
        l.log_prob = c.log_prob;
        next.push_back(std::move(l));
      }
    }
    if (finished.size() >= cfg.beam) break;
    live = std::move(next);
  }
  std::stable_sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& c) {
    if (a.finished != c.finished) return a.finished;
    return a.score > c.score;
  });
  if (finished.size() > cfg.beam) finished.resize(cfg.beam);
  return finished;
}

std::vector<std::size_t> beam_decode(const Model& model, const std::vector<std::size_t>& src, const DecodeConfig& cfg) {
  auto hyps = beam_search(model, src, cfg);
  if (hyps.empty()) return {};
  auto tokens = hyps.front().tokens;
  if (!tokens.empty() && tokens.back() == kEos) tokens.pop_back();
  return tokens;
}

std::vector<std::size_t> greedy_decode(const Model& model, const std::vector<std::size_t>& src,
                                       const DecodeConfig& cfg) {
  nk::Binding b(false);
  Encoded enc = encode_source(model, src, bind_weights(model.params(), b));
  DecoderState state = decoder_start(model);
  align::RngStream rng(cfg.seed, align::stream_id(kBeamStream));
  std::vector<std::size_t> out;
  const std::size_t max_len = 2 * src.size() + cfg.max_extra;
  for (std::size_t step = 0; step < max_len; ++step) {
    decoder_step(enc, state);
    const nk::Array lp = step_log_predictive(enc, enc.steps() - 1, cfg, rng);
    const std::size_t v = argmax_of(lp.storage());
    if (v == kEos) break;
    out.push_back(v);
    state.prev = v;
  }
  return out;
}

EntropyReport entropy_report(const Model& model, const InferenceNet* net, std::span<const Example> data,
                             std::size_t threads) {
  std::vector<double> hp(data.size()), hq(data.size());
  parallel_for(data.size(), threads, [&](std::size_t n) {
    Bound b;
    bind(b, model, net, data[n]);
    for (std::size_t j = 0; j < b.enc.steps(); ++j) {
      hp[n] += entropy_of(prior_mean_probs(b.enc, j));
      if (b.q) hq[n] += entropy_of(q_mean_probs(*b.q, j));
    }
  });
  EntropyReport r;
  for (const auto& ex : data) r.steps += ex.steps();
  const double steps = std::max<double>(1.0, double(r.steps));
  r.prior = std::accumulate(hp.begin(), hp.end(), 0.0) / steps;
  if (net) r.posterior = std::accumulate(hq.begin(), hq.end(), 0.0) / steps;
  return r;
}

AccuracyReport alignment_accuracy(const Model& model, const InferenceNet* net, std::span<const Example> data,
                                  std::size_t threads) {
  std::vector<std::size_t> hit_p(data.size()), hit_q(data.size()), steps(data.size());
  parallel_for(data.size(), threads, [&](std::size_t n) {
    const Example& ex = data[n];
    if (std::none_of(ex.gold.begin(), ex.gold.end(), [](long g) { return g >= 0; })) return;
    Bound b;
    bind(b, model, net, ex);
    for (std::size_t j = 0; j < b.enc.steps() && j < ex.gold.size(); ++j) {
      if (ex.gold[j] < 0) continue;
      const auto g = static_cast<std::size_t>(ex.gold[j]);
      ++steps[n];
      const bool p_hit = argmax_of(prior_mean_probs(b.enc, j)) == g;
      hit_p[n] += p_hit;
      hit_q[n] += b.q ? argmax_of(q_mean_probs(*b.q, j)) == g : p_hit;
    }
  });
  AccuracyReport r;
  r.steps = std::accumulate(steps.begin(), steps.end(), std::size_t{0});
  if (r.steps == 0) throw InputError("alignment accuracy needs gold alignments");
  r.prior = double(std::accumulate(hit_p.begin(), hit_p.end(), std::size_t{0})) / double(r.steps);
  r.posterior = double(std::accumulate(hit_q.begin(), hit_q.end(), std::size_t{0})) / double(r.steps);
  return r;
}

AlignmentReport alignment_report(const Model& model, const InferenceNet* net, const Example& ex) {
  Bound b;
  bind(b, model, net, ex);
  AlignmentReport r;
  for (std::size_t j = 0; j < b.enc.steps(); ++j) {
    r.prior.push_back(prior_mean_probs(b.enc, j));
    r.prior_entropy.push_back(entropy_of(r.prior.back()));
    if (b.q) {
      r.posterior.push_back(q_mean_probs(*b.q, j));
      r.posterior_entropy.push_back(entropy_of(r.posterior.back()));
    }
  }
  return r;
}

std::string format_tsv(const std::vector<std::vector<double>>& rows) {
  constexpr long kUnits = 1000000;
  std::string out;
  for (const auto& row : rows) {
    std::vector<long> units(row.size());
    std::vector<double> rem(row.size());
    long total = 0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const double scaled = std::clamp(row[i], 0.0, 1.0) * double(kUnits);
      units[i] = static_cast<long>(std::floor(scaled));
      rem[i] = scaled - double(units[i]);
      total += units[i];
    }
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return rem[a] > rem[c]; });
    const long deficit = std::clamp<long>(kUnits - total, 0, static_cast<long>(row.size()));
    for (long k = 0; k < deficit; ++k) ++units[order[static_cast<std::size_t>(k)]];
    for (std::size_t i = 0; i < row.size(); ++i) {
      char frac[8];
      std::snprintf(frac, sizeof frac, "%06ld", units[i] % kUnits);
      if (i) out += '\t';
      out += std::to_string(units[i] / kUnits) + "." + frac;
    }
    out += '\n';
  }
  return out;
}

std::vector<std::vector<double>> read_tsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    std::vector<double> row;
    std::istringstream cells(line);
    for (std::string cell; std::getline(cells, cell, '\t');) {
      double v = 0.0;
      const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (r.ec != std::errc() || r.ptr != cell.data() + cell.size()) {
        throw InputError(path.string() + ":" + std::to_string(line_no) + ": bad value '" + cell + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<fs::path> export_alignments(const Model& model, const InferenceNet* net, const Example& ex,
                                        const fs::path& dir) {
  const AlignmentReport r = alignment_report(model, net, ex);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  auto write = [&](const std::string& name, const std::vector<std::vector<double>>& rows) {
    const fs::path p = dir / name;
    std::ofstream out(p);
    out << format_tsv(rows);
    if (!out) throw IoError("cannot write " + p.string());
    written.push_back(p);
  };
  write("p.tsv", r.prior);
  if (net) write("q.tsv", r.posterior);
  return written;
}

Metrics evaluate(const Model& model, const InferenceNet* net, std::span<const Example> data, const DecodeConfig& cfg,
                 std::size_t threads) {
  Metrics m;
  m.mode = cfg.mode;
  m.K = cfg.mode == PredictMode::kmax ? cfg.K : 0;
  m.nll = predictive_nll(model, data, cfg, threads);
  m.entropy = entropy_report(model, net, data, threads);
  const bool has_gold = std::any_of(data.begin(), data.end(), [](const Example& ex) {
    return std::any_of(ex.gold.begin(), ex.gold.end(), [](long g) { return g >= 0; });
  });
  if (has_gold) m.accuracy = alignment_accuracy(model, net, data, threads);
  return m;
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json j;
  j["nll"] = m.nll.per_token();
  j["ppl"] = m.nll.ppl();
  j["tokens"] = m.nll.tokens;
  j["examples"] = m.nll.examples;
  j["entropy_p"] = m.entropy.prior;
  j["entropy_q"] = m.entropy.posterior ? nlohmann::json(*m.entropy.posterior) : nlohmann::json();
  j["align_acc_p"] = m.accuracy ? nlohmann::json(m.accuracy->prior) : nlohmann::json();
  j["align_acc_q"] = m.accuracy ? nlohmann::json(m.accuracy->posterior) : nlohmann::json();
  j["mode"] = mode_name(m.mode);
  j["K"] = m.mode == PredictMode::kmax ? nlohmann::json(m.K) : nlohmann::json();
  return j;
}

}  // namespace laln
