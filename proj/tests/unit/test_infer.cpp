// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "laln/error.hpp"
#include "laln/infer/infer.hpp"

using namespace laln;
using namespace laln::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("laln_infer_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<Example> random_seq_data(const ModelConfig& c, std::size_t n, std::uint64_t seed, std::size_t tmin = 2,
                                     std::size_t tmax = 6) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> len(tmin, tmax);
  std::vector<Example> out;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = len(gen);
    out.push_back(random_seq_example(gen, c, t, t + 1));
  }
  return out;
}

// p(y) enumerated from per-atom probabilities, independent of the predictive code paths.
double enumerate_log_lik(const Encoded& enc, std::size_t j, const std::vector<double>& weights) {
  const nk::Array atoms = atom_log_probs(enc, j).array();
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * std::exp(atoms.at(enc.targets[j], i));
  return std::log(s);
}

double beta_density(double x, double a, double b) {
  return std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1) * std::log(x) +
                  (b - 1) * std::log1p(-x));
}

}  // namespace

TEST_CASE("mode parsing and validation") {
  CHECK(parse_mode("kmax") == PredictMode::kmax);
  CHECK(mode_name(PredictMode::sample) == "sample");
  CHECK_THROWS_AS(parse_mode("greedy"), ConfigError);
  DecodeConfig cfg;
  cfg.K = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = DecodeConfig();
  cfg.alpha = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("exact and kmax predictive against enumeration") {
  const ModelConfig c = tiny_seq_config();
  Model m(c, 3);
  const auto data = random_seq_data(c, 10, 4);
  for (const auto& ex : data) {
    nk::Binding b(false);
    const Encoded enc = encode(m, ex, bind_weights(m.params(), b));
    align::RngStream rng(1);
    for (std::size_t j = 0; j < enc.steps(); ++j) {
      const auto p = prior_mean_probs(enc, j);
      DecodeConfig cfg;
      const double exact = step_log_predictive(enc, j, cfg, rng)[enc.targets[j]];
      CHECK(exact == doctest::Approx(enumerate_log_lik(enc, j, p)).epsilon(1e-12));
      cfg.mode = PredictMode::kmax;
      cfg.K = ex.src.size();
      CHECK(std::abs(step_log_predictive(enc, j, cfg, rng)[enc.targets[j]] - exact) <= 1e-9);
      cfg.K = 2;
      std::vector<std::size_t> order(p.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
      std::vector<double> top(p.size(), 0.0);
      const double z = p[order[0]] + p[order[1]];
      top[order[0]] = p[order[0]] / z;
      top[order[1]] = p[order[1]] / z;
      CHECK(step_log_predictive(enc, j, cfg, rng)[enc.targets[j]] ==
            doctest::Approx(enumerate_log_lik(enc, j, top)).epsilon(1e-12));
      const auto full = step_log_predictive(enc, j, cfg, rng);
      double total = 0.0;
      for (double v : full.storage()) total += std::exp(v);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
    DecodeConfig cfg;
    double sum = 0.0;
    for (double lp : example_log_likelihoods(m, ex, cfg)) sum += lp;
    CHECK(-sum == doctest::Approx(exact_marginal_nll(enc).item()).epsilon(1e-12));
    cfg.mode = PredictMode::soft;
    sum = 0.0;
    for (double lp : example_log_likelihoods(m, ex, cfg)) sum += lp;
    CHECK(-sum == doctest::Approx(soft_nll(enc).item()).epsilon(1e-12));
  }
}

TEST_CASE("hand kmax example") {
  const Encoded enc = hand_encoded({0.7, 0.3}, {0.9, 0.2});
  align::RngStream rng(1);
  DecodeConfig cfg;
  cfg.mode = PredictMode::kmax;
  cfg.K = 1;
  CHECK(-step_log_predictive(enc, 0, cfg, rng)[1] == doctest::Approx(0.1053605).epsilon(1e-6));
  cfg.mode = PredictMode::exact;
  CHECK(step_log_predictive(enc, 0, cfg, rng)[1] == doctest::Approx(std::log(0.7 * 0.9 + 0.3 * 0.2)));
}

TEST_CASE("mode errors") {
  const Encoded enc = hand_encoded({0.5, 0.5}, {0.9, 0.2});
  align::RngStream rng(1);
  DecodeConfig cfg;
  cfg.mode = PredictMode::sample;
  CHECK_THROWS_AS(step_log_predictive(enc, 0, cfg, rng), ConfigError);
  Encoded dir = enc;
  dir.prior = PriorKind::dirichlet;
  cfg.mode = PredictMode::exact;
  CHECK_THROWS_AS(step_log_predictive(dir, 0, cfg, rng), ConfigError);
  cfg.mode = PredictMode::kmax;
  CHECK_THROWS_AS(step_log_predictive(dir, 0, cfg, rng), ConfigError);
}

TEST_CASE("sampled predictive matches Beta quadrature") {
  const std::vector<double> emit{0.9, 0.2};
  Encoded enc = hand_encoded({2.0, 3.0}, emit);  // scores log 2, log 3 give alpha (2, 3)
  enc.prior = PriorKind::dirichlet;
  const int n = 20000;
  double quad = 0.0;
  for (int k = 1; k < n; ++k) {
    const double x = double(k) / n;
    quad += beta_density(x, 2.0, 3.0) * hand_emit(emit, {x, 1 - x}) / n;
  }
  DecodeConfig cfg;
  cfg.mode = PredictMode::sample;
  cfg.S = 20000;
  align::RngStream rng(5);
  const double est = std::exp(step_log_predictive(enc, 0, cfg, rng)[1]);
  CHECK(std::abs(est - quad) <= 0.01);
}

TEST_CASE("predictive nll is deterministic across thread counts") {
  ModelConfig c = tiny_seq_config();
  c.prior = PriorKind::dirichlet;
  Model m(c, 8);
  const auto data = random_seq_data(c, 12, 9);
  DecodeConfig cfg;
  cfg.mode = PredictMode::sample;
  cfg.S = 3;
  const NllResult a = predictive_nll(m, data, cfg, 1);
  const NllResult b = predictive_nll(m, data, cfg, 3);
  CHECK(a.nll == b.nll);
  CHECK(a.tokens == b.tokens);
  CHECK(a.ppl() == doctest::Approx(std::exp(a.nll / double(a.tokens))));
}

TEST_CASE("beam search") {
  const ModelConfig c = tiny_seq_config();
  Model m(c, 11);
  const auto data = random_seq_data(c, 8, 12);
  for (const auto& ex : data) {
    DecodeConfig cfg;
    cfg.beam = 1;
    CHECK(beam_decode(m, ex.src, cfg) == greedy_decode(m, ex.src, cfg));

    cfg.beam = 4;
    const auto hyps = beam_search(m, ex.src, cfg);
    REQUIRE(!hyps.empty());
    CHECK(hyps.size() <= 4);
    for (std::size_t k = 1; k < hyps.size(); ++k) {
      if (hyps[k].finished == hyps[k - 1].finished) CHECK(hyps[k].score <= hyps[k - 1].score);
    }
    for (const auto& h : hyps) {
      CHECK(h.score == doctest::Approx(h.log_prob / length_penalty(h.tokens.size(), 1.0)));
      if (!h.finished) continue;
      Example forced;
      forced.src = ex.src;
      forced.tgt = h.tokens;
      double lp = 0.0;
      for (double v : example_log_likelihoods(m, forced, cfg)) lp += v;
      CHECK(lp == doctest::Approx(h.log_prob).epsilon(1e-10));
    }

    cfg.alpha = 0.0;
    const auto raw = beam_search(m, ex.src, cfg);
    for (const auto& h : raw) CHECK(h.score == h.log_prob);
    for (std::size_t k = 1; k < raw.size(); ++k) {
      if (raw[k].finished == raw[k - 1].finished) CHECK(raw[k].log_prob <= raw[k - 1].log_prob);
    }
  }
  CHECK(length_penalty(1, 1.0) == doctest::Approx(1.0));
  CHECK(length_penalty(7, 1.0) == doctest::Approx(2.0));
  CHECK(length_penalty(7, 0.0) == 1.0);
}

TEST_CASE("entropy report") {
  SUBCASE("near-uniform initialisation") {
    ModelConfig c = tiny_seq_config();
    c.init_scale = 0.1;
    Model m(c, 21);
    const auto data = random_seq_data(c, 20, 22, 5, 5);
    const EntropyReport r = entropy_report(m, nullptr, data);
    CHECK(!r.posterior.has_value());
    CHECK(r.prior <= std::log(5.0) + 1e-12);
    CHECK(r.prior >= 0.95 * std::log(5.0));
    CHECK(r.steps == 20 * 6);
  }
  SUBCASE("bounded by log T with an inference network") {
    const ModelConfig c = tiny_seq_config();
    Model m(c, 23);
    InferConfig ic;
    ic.hidden = 4;
    ic.init_scale = 0.5;
    InferenceNet net(ic, m, 24);
    const auto data = random_seq_data(c, 10, 25, 3, 3);
    const EntropyReport r = entropy_report(m, &net, data);
    REQUIRE(r.posterior.has_value());
    CHECK(r.prior >= 0.0);
    CHECK(r.prior <= std::log(3.0));
    CHECK(*r.posterior >= 0.0);
    CHECK(*r.posterior <= std::log(3.0));
  }
  SUBCASE("one-hot priors") {
    ModelConfig c = tiny_set_config(3);
    c.init_scale = 0.0;
    Model m(c, 1);
    m.params().at("att.v").value.fill(1000.0);
    m.params().at("att.ws").value.at(0, 0) = 1.0;
    Example ex;
    ex.features = nk::Array::matrix(3, 2, {1, 0, 0, 1, 0, 0});
    ex.src = {1, 2};
    ex.tgt = {0};
    const std::vector<Example> data{ex};
    CHECK(entropy_report(m, nullptr, data).prior <= 1e-12);
  }
}

TEST_CASE("alignment accuracy") {
  const ModelConfig c = tiny_seq_config();
  Model m(c, 31);
  SUBCASE("chance level against random gold") {
    auto data = random_seq_data(c, 600, 32, 2, 6);
    std::mt19937_64 gen(33);
    double expected = 0.0, var = 0.0;
    std::size_t steps = 0;
    for (auto& ex : data) {
      const double t = double(ex.src.size());
      std::uniform_int_distribution<long> pick(0, static_cast<long>(ex.src.size()) - 1);
      for (std::size_t j = 0; j + 1 < ex.tgt.size(); ++j) {
        ex.gold[j] = pick(gen);
        expected += 1.0 / t;
        var += (1.0 / t) * (1.0 - 1.0 / t);
        ++steps;
      }
    }
    const AccuracyReport r = alignment_accuracy(m, nullptr, data);
    CHECK(r.steps == steps);
    CHECK(std::abs(r.prior - expected / double(steps)) <= 3.0 * std::sqrt(var) / double(steps));
    CHECK(r.posterior == r.prior);
  }
  SUBCASE("missing gold") {
    const auto data = random_seq_data(c, 3, 34);
    CHECK_THROWS_AS(alignment_accuracy(m, nullptr, data), InputError);
  }
}

TEST_CASE("tsv formatting") {
  const std::string s = format_tsv({{1.0 / 3, 1.0 / 3, 1.0 / 3}, {1.0}, {0.25, 0.75}});
  CHECK(s == "0.333334\t0.333333\t0.333333\n1.000000\n0.250000\t0.750000\n");
}

TEST_CASE("export alignments") {
  const ModelConfig c = tiny_seq_config();
  Model m(c, 41);
  InferConfig ic;
  ic.hidden = 4;
  ic.init_scale = 0.5;
  InferenceNet net(ic, m, 42);
  std::mt19937_64 gen(43);
  SUBCASE("round trip with both distributions") {
    const Example ex = random_seq_example(gen, c, 7, 5);
    const fs::path dir = scratch("both");
    const auto files = export_alignments(m, &net, ex, dir);
    CHECK(files.size() == 2);
    const AlignmentReport r = alignment_report(m, &net, ex);
    const auto p = read_tsv(dir / "p.tsv");
    const auto q = read_tsv(dir / "q.tsv");
    REQUIRE(p.size() == 5);
    REQUIRE(q.size() == 5);
    for (std::size_t j = 0; j < 5; ++j) {
      REQUIRE(p[j].size() == 7);
      CHECK(std::abs(std::accumulate(p[j].begin(), p[j].end(), 0.0) - 1.0) <= 1e-6);
      CHECK(std::abs(std::accumulate(q[j].begin(), q[j].end(), 0.0) - 1.0) <= 1e-6);
      for (std::size_t i = 0; i < 7; ++i) {
        CHECK(std::abs(p[j][i] - r.prior[j][i]) <= 1e-6);
        CHECK(std::abs(q[j][i] - r.posterior[j][i]) <= 1e-6);
      }
    }
  }
  SUBCASE("prior only without a network; single column for one source word") {
    const Example ex = random_seq_example(gen, c, 1, 3);
    const fs::path dir = scratch("single");
    CHECK(export_alignments(m, nullptr, ex, dir).size() == 1);
    CHECK(!fs::exists(dir / "q.tsv"));
    const auto p = read_tsv(dir / "p.tsv");
    REQUIRE(p.size() == 3);
    for (const auto& row : p) CHECK(row == std::vector<double>{1.0});
  }
  SUBCASE("io error names the path") {
    const fs::path blocker = scratch("blocker");
    std::ofstream(blocker) << "x";
    const Example ex = random_seq_example(gen, c, 2, 2);
    try {
      export_alignments(m, nullptr, ex, blocker / "sub");
      FAIL("expected an error");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find(blocker.string()) != std::string::npos);
    }
  }
}

TEST_CASE("metrics json") {
  const ModelConfig c = tiny_seq_config();
  Model m(c, 51);
  auto data = random_seq_data(c, 4, 52);
  data[0].gold[0] = 0;
  DecodeConfig cfg;
  cfg.mode = PredictMode::kmax;
  cfg.K = 5;
  const nlohmann::json j = to_json(evaluate(m, nullptr, data, cfg));
  for (const char* k : {"nll", "ppl", "entropy_p", "entropy_q", "align_acc_p", "align_acc_q", "mode", "K"}) {
    CHECK(j.contains(k));
  }
  CHECK(j["K"] == 5);
  CHECK(j["mode"] == "kmax");
  CHECK(j["entropy_q"].is_null());
  cfg.mode = PredictMode::exact;
  const nlohmann::json e = to_json(evaluate(m, nullptr, data, cfg));
  CHECK(e["K"].is_null());
  CHECK(e["ppl"].get<double>() == doctest::Approx(std::exp(e["nll"].get<double>())));
}
