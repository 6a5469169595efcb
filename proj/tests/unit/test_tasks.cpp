// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "laln/error.hpp"
#include "laln/tasks/tasks.hpp"

using namespace laln;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("laln_tasks_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

TaskSpec small_spec() {
  TaskSpec s;
  s.train = 200;
  s.valid = 20;
  s.test = 20;
  return s;
}

}  // namespace

TEST_CASE("noiseless lexicon task is a relexicalised permutation") {
  for (Reorder r : {Reorder::monotone, Reorder::swap, Reorder::reverse}) {
    TaskSpec s = small_spec();
    s.eps = 0.0;
    s.kappa = 1e12;
    s.reorder = r;
    const RawDataset d = gen_lexicon_task(s);
    const auto lex = make_lexicon(s);
    for (const auto& ex : d.train.examples) {
      const std::size_t t = ex.src.size();
      REQUIRE(ex.tgt.size() == t);
      for (std::size_t j = 0; j < t; ++j) {
        const std::size_t c = lexicon_center(r, t, j);
        CHECK(ex.gold[j] == static_cast<long>(c));
        CHECK(ex.tgt[j] == tgt_word(lex[std::stoul(ex.src[c].substr(1))]));
      }
    }
    CHECK(d.train.entropy == doctest::Approx(0.0).epsilon(1e-6));
  }
}

TEST_CASE("lexicon is a bijection and centers are permutations") {
  const auto lex = make_lexicon(small_spec());
  CHECK(std::set<std::size_t>(lex.begin(), lex.end()).size() == lex.size());
  for (Reorder r : {Reorder::monotone, Reorder::swap, Reorder::reverse}) {
    for (std::size_t t = 1; t <= 9; ++t) {
      std::set<std::size_t> seen;
      for (std::size_t j = 0; j < t; ++j) seen.insert(lexicon_center(r, t, j));
      CHECK(seen.size() == t);
    }
  }
}

TEST_CASE("per-token entropy matches a Monte-Carlo estimate") {
  TaskSpec s = small_spec();
  s.reorder = Reorder::swap;
  s.kappa = 3.0;
  s.eps = 0.2;
  const auto lex = make_lexicon(s);
  align::RngStream src_rng(99);
  for (int trial = 0; trial < 4; ++trial) {
    const std::size_t t = 3 + trial * 2;
    std::vector<std::size_t> src(t);
    for (auto& v : src) v = src_rng.below(4);  // force repeated words
    const int n = 400000;
    std::vector<std::map<std::size_t, int>> freq(t);
    align::RngStream rng(7, trial);
    std::vector<std::size_t> tgt;
    std::vector<long> gold;
    for (int k = 0; k < n; ++k) {
      sample_lexicon_target(s, lex, src, rng, tgt, gold);
      for (std::size_t j = 0; j < t; ++j) ++freq[j][tgt[j]];
    }
    double plug_in = 0.0;
    for (const auto& f : freq)
      for (const auto& [tok, c] : f) plug_in -= (c / double(n)) * std::log(c / double(n));
    CHECK(std::abs(plug_in - lexicon_entropy(s, lex, src)) / double(t) <= 0.01);
  }
}

TEST_CASE("generation is deterministic") {
  TaskSpec s = small_spec();
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  write_dataset(gen_lexicon_task(s), a);
  write_dataset(gen_lexicon_task(s), b);
  for (const char* f : {"train.src", "train.tgt", "train.align", "test.tgt", "meta.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  s.seed = 2;
  write_dataset(gen_lexicon_task(s), b);
  CHECK(slurp(a / "train.tgt") != slurp(b / "train.tgt"));
  TaskSpec q = small_spec();
  q.task = "setquery";
  q.vocab = 6;
  write_dataset(gen_setquery_task(q), a);
  write_dataset(gen_setquery_task(q), b);
  CHECK(slurp(a / "train.feat") == slurp(b / "train.feat"));
}

TEST_CASE("gold indices are valid") {
  for (const char* task : {"lexicon", "setquery"}) {
    TaskSpec s = small_spec();
    s.task = task;
    const RawDataset d = generate(s);
    for (const auto& ex : d.train.examples) {
      const std::size_t t = s.task == "setquery" ? ex.features.cols() : ex.src.size();
      CHECK(t >= s.min_len);
      CHECK(t <= s.max_len);
      for (long g : ex.gold) {
        CHECK(g >= 0);
        CHECK(g < static_cast<long>(t));
      }
    }
  }
}

TEST_CASE("setquery task") {
  TaskSpec s = small_spec();
  s.task = "setquery";
  s.vocab = 8;
  SUBCASE("noiseless answers are the queried object's class") {
    s.eps = 0.0;
    const RawDataset d = gen_setquery_task(s);
    CHECK(setquery_entropy(s) == 0.0);
    CHECK(d.train.entropy == 0.0);
    for (const auto& ex : d.train.examples) {
      const std::size_t attr = std::stoul(ex.src[1].substr(1));
      std::size_t matches = 0, cls = 0;
      for (std::size_t i = 0; i < ex.features.cols(); ++i) {
        if (ex.features.at(s.vocab + attr, i) == 1.0) {
          ++matches;
          for (std::size_t c = 0; c < s.vocab; ++c)
            if (ex.features.at(c, i) == 1.0) cls = c;
        }
      }
      CHECK(matches == 1);
      CHECK(ex.tgt[0] == "c" + std::to_string(cls));
    }
  }
  SUBCASE("label marginals are uniform") {
    s.train = 10000;
    const RawDataset d = gen_setquery_task(s);
    std::map<std::string, int> counts;
    for (const auto& ex : d.train.examples) ++counts[ex.tgt[0]];
    double chi2 = 0.0;
    const double expected = 10000.0 / 8.0;
    for (const auto& [c, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
    CHECK(counts.size() == 8);
    CHECK(chi2 < 18.475);  // 1% critical value, 7 degrees of freedom
  }
  SUBCASE("round trip through disk") {
    const fs::path dir = scratch("setq");
    const RawDataset d = gen_setquery_task(s);
    write_dataset(d, dir);
    const Dataset loaded = load_dataset(dir);
    CHECK(loaded.task == TaskKind::set);
    CHECK(loaded.feature_dim == s.vocab + s.attributes);
    REQUIRE(loaded.train.size() == d.train.examples.size());
    for (std::size_t n = 0; n < 20; ++n) {
      CHECK(nk::max_abs_diff(loaded.train[n].features, d.train.examples[n].features) == 0.0);
      CHECK(loaded.tgt.token(loaded.train[n].tgt[0]) == d.train.examples[n].tgt[0]);
      CHECK(loaded.train[n].gold == d.train.examples[n].gold);
    }
  }
}

TEST_CASE("task spec validation") {
  TaskSpec s;
  s.eps = 1.0;
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = TaskSpec();
  s.kappa = 0.0;
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = TaskSpec();
  s.vocab = 1;
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = TaskSpec();
  s.min_len = 5;
  s.max_len = 4;
  CHECK_THROWS_AS(gen_lexicon_task(s), ParameterError);
}

TEST_CASE("load_parallel") {
  const fs::path dir = scratch("parallel");
  write_file(dir / "a.src", "the cat sat\nthe dog\n");
  write_file(dir / "a.tgt", "le chat assis\nle chien\n");
  SUBCASE("without alignments") {
    const ParallelData d = load_parallel(dir / "a.src", dir / "a.tgt");
    REQUIRE(d.examples.size() == 2);
    for (const auto& ex : d.examples)
      for (long g : ex.gold) CHECK(g == -1);
    CHECK(d.src.size() == 4 + 1);  // the cat sat dog + <unk>
    CHECK(d.tgt.size() == 4 + 3);
    CHECK(d.src.token(1) == "the");  // most frequent first
    CHECK(d.examples[0].tgt.back() == kEos);
  }
  SUBCASE("round trip of token ids") {
    const ParallelData d = load_parallel(dir / "a.src", dir / "a.tgt");
    RawDataset raw;
    for (const auto& ex : d.examples) {
      RawExample r;
      for (std::size_t id : ex.src) r.src.push_back(d.src.token(id));
      for (std::size_t k = 0; k + 1 < ex.tgt.size(); ++k) r.tgt.push_back(d.tgt.token(ex.tgt[k]));
      raw.train.examples.push_back(r);
    }
    const fs::path out = scratch("parallel_rt");
    write_dataset(raw, out);
    const ParallelData back = load_parallel(out / "train.src", out / "train.tgt");
    for (std::size_t n = 0; n < 2; ++n) {
      CHECK(back.examples[n].src == d.examples[n].src);
      CHECK(back.examples[n].tgt == d.examples[n].tgt);
    }
  }
  SUBCASE("alignments") {
    write_file(dir / "a.align", "0-0 1-1 2-2\n1-1\n");
    const ParallelData d = load_parallel(dir / "a.src", dir / "a.tgt", dir / "a.align");
    CHECK(d.examples[0].gold == std::vector<long>{0, 1, 2, -1});
    CHECK(d.examples[1].gold == std::vector<long>{-1, 1, -1});
  }
  SUBCASE("malformed alignment names the line") {
    write_file(dir / "b.align", "0-0\n1x1\n");
    try {
      load_parallel(dir / "a.src", dir / "a.tgt", dir / "b.align");
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  SUBCASE("line-count mismatch") {
    write_file(dir / "c.tgt", "le chat\n");
    CHECK_THROWS_AS(load_parallel(dir / "a.src", dir / "c.tgt"), InputError);
  }
  SUBCASE("cutoff and max length") {
    LoadOptions opts;
    opts.cutoff = 2;
    const ParallelData d = load_parallel(dir / "a.src", dir / "a.tgt", {}, opts);
    CHECK(d.src.size() == 2);  // <unk> the
    CHECK(d.examples[0].src[1] == kUnk);
    opts.cutoff = 1;
    opts.max_len = 2;
    CHECK(load_parallel(dir / "a.src", dir / "a.tgt", {}, opts).dropped == 1);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_parallel(dir / "nope.src", dir / "a.tgt"), IoError); }
}

TEST_CASE("generated dataset loads with metadata") {
  const fs::path dir = scratch("lex");
  TaskSpec s = small_spec();
  const RawDataset d = gen_lexicon_task(s);
  write_dataset(d, dir);
  const Dataset loaded = load_dataset(dir);
  CHECK(loaded.task == TaskKind::sequence);
  CHECK(loaded.train.size() == 200);
  CHECK(loaded.meta["splits"]["test"]["entropy"].get<double>() == doctest::Approx(d.test.entropy));
  CHECK(loaded.meta["spec"]["kappa"].get<double>() == 8.0);
  CHECK(loaded.src.size() <= s.vocab + 1);
  for (const auto& ex : loaded.train) CHECK(ex.tgt.size() == ex.src.size() + 1);
}
