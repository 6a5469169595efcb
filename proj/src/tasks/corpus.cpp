// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "laln/error.hpp"
#include "laln/tasks/tasks.hpp"

namespace laln {

namespace fs = std::filesystem;

namespace {

const char* const kSplits[3] = {"train", "valid", "test"};

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<long> parse_alignment(const std::string& line, std::size_t line_no, std::size_t src_len,
                                  std::size_t tgt_len, const fs::path& path) {
  std::vector<long> gold(tgt_len, -1);
  for (const std::string& pair : split_ws(line)) {
    const auto dash = pair.find('-');
    std::size_t i = 0, j = 0;
    bool ok = dash != std::string::npos && dash > 0 && dash + 1 < pair.size();
    if (ok) {
      auto r1 = std::from_chars(pair.data(), pair.data() + dash, i);
      auto r2 = std::from_chars(pair.data() + dash + 1, pair.data() + pair.size(), j);
      ok = r1.ec == std::errc() && r1.ptr == pair.data() + dash && r2.ec == std::errc() &&
           r2.ptr == pair.data() + pair.size();
    }
    if (!ok) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": malformed alignment pair '" + pair + "'");
    }
    if (i >= src_len || j >= tgt_len) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": alignment pair '" + pair +
                       "' outside sentence lengths");
    }
    if (gold[j] < 0) gold[j] = static_cast<long>(i);
  }
  return gold;
}

std::string format_double(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string feature_line(const nk::Array& f) {
  std::string out;
  for (std::size_t i = 0; i < f.cols(); ++i) {
    if (i) out += " | ";
    for (std::size_t k = 0; k < f.rows(); ++k) {
      if (k) out += ' ';
      out += format_double(f.at(k, i));
    }
  }
  return out;
}

nk::Array parse_features(const std::string& line, std::size_t line_no, const fs::path& path) {
  std::vector<std::vector<double>> objects(1);
  for (const std::string& tok : split_ws(line)) {
    if (tok == "|") {
      objects.emplace_back();
      continue;
    }
    double v = 0.0;
    auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": bad feature value '" + tok + "'");
    }
    objects.back().push_back(v);
  }
  const std::size_t f = objects[0].size();
  if (f == 0) throw InputError(path.string() + ":" + std::to_string(line_no) + ": empty object");
  nk::Array out({f, objects.size()});
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].size() != f) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": objects have different feature sizes");
    }
    for (std::size_t k = 0; k < f; ++k) out.at(k, i) = objects[i][k];
  }
  return out;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw IoError("write failed for " + p.string());
}

std::string join(const std::vector<std::string>& toks) {
  std::string s;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) s += ' ';
    s += toks[i];
  }
  return s;
}

std::vector<RawExample> read_split(const fs::path& dir, const std::string& name, bool is_set) {
  const fs::path align = dir / (name + ".align");
  const bool has_align = fs::exists(align);
  auto examples =
      read_parallel(dir / (name + ".src"), dir / (name + ".tgt"), has_align && !is_set ? align : fs::path());
  if (is_set) {
    const fs::path fp = dir / (name + ".feat");
    const auto lines = read_lines(fp);
    if (lines.size() != examples.size()) {
      throw InputError(fp.string() + ": " + std::to_string(lines.size()) + " lines, expected " +
                       std::to_string(examples.size()));
    }
    for (std::size_t n = 0; n < lines.size(); ++n) examples[n].features = parse_features(lines[n], n + 1, fp);
    if (has_align) {
      const auto a = read_lines(align);
      if (a.size() != examples.size()) throw InputError("line-count mismatch: " + align.string());
      for (std::size_t n = 0; n < a.size(); ++n) {
        auto& ex = examples[n];
        ex.gold = parse_alignment(a[n], n + 1, ex.features.cols(), ex.tgt.size(), align);
      }
    }
  }
  return examples;
}

std::map<std::string, std::size_t> count(const std::vector<RawExample>& xs, bool target) {
  std::map<std::string, std::size_t> c;
  for (const auto& x : xs)
    for (const auto& t : target ? x.tgt : x.src) ++c[t];
  return c;
}

Example to_example(const RawExample& r, const Vocab& src, const Vocab& tgt, bool is_set) {
  Example ex;
  for (const auto& t : r.src) ex.src.push_back(src.id(t));
  for (const auto& t : r.tgt) ex.tgt.push_back(tgt.id(t));
  ex.gold = r.gold;
  if (ex.gold.empty()) ex.gold.assign(r.tgt.size(), -1);
  if (is_set) {
    ex.features = r.features;
  } else {
    ex.tgt.push_back(kEos);
    ex.gold.push_back(-1);
  }
  return ex;
}

bool too_long(const RawExample& r, const LoadOptions& opts) {
  return r.src.size() > opts.max_len || r.tgt.size() > opts.max_len;
}

}  // namespace

std::vector<RawExample> read_parallel(const fs::path& src, const fs::path& tgt, const fs::path& align) {
  const auto s = read_lines(src);
  const auto t = read_lines(tgt);
  if (s.size() != t.size()) {
    throw InputError("line-count mismatch: " + src.string() + " has " + std::to_string(s.size()) + ", " +
                     tgt.string() + " has " + std::to_string(t.size()));
  }
  std::vector<std::string> a;
  if (!align.empty()) {
    a = read_lines(align);
    if (a.size() != s.size()) {
      throw InputError("line-count mismatch: " + align.string() + " has " + std::to_string(a.size()) +
                       ", expected " + std::to_string(s.size()));
    }
  }
  std::vector<RawExample> out(s.size());
  for (std::size_t n = 0; n < s.size(); ++n) {
    out[n].src = split_ws(s[n]);
    out[n].tgt = split_ws(t[n]);
    if (out[n].src.empty() || out[n].tgt.empty()) {
      throw InputError((out[n].src.empty() ? src : tgt).string() + ":" + std::to_string(n + 1) + ": empty line");
    }
    if (!align.empty()) out[n].gold = parse_alignment(a[n], n + 1, out[n].src.size(), out[n].tgt.size(), align);
  }
  return out;
}

ParallelData load_parallel(const fs::path& src, const fs::path& tgt, const fs::path& align, const LoadOptions& opts) {
  std::vector<RawExample> raw;
  ParallelData out;
  for (auto& r : read_parallel(src, tgt, align)) {
    if (too_long(r, opts)) ++out.dropped;
    else raw.push_back(std::move(r));
  }
  out.src = Vocab(source_reserved(), count(raw, false), opts.cutoff);
  out.tgt = Vocab(target_reserved(), count(raw, true), opts.cutoff);
  for (const auto& r : raw) out.examples.push_back(to_example(r, out.src, out.tgt, false));
  return out;
}

nlohmann::json dataset_meta(const RawDataset& raw) {
  nlohmann::json splits;
  const RawSplit* parts[3] = {&raw.train, &raw.valid, &raw.test};
  for (std::size_t s = 0; s < 3; ++s) {
    const RawSplit& p = *parts[s];
    splits[kSplits[s]] = {{"examples", p.examples.size()},
                          {"tokens", p.tokens},
                          {"entropy", p.entropy},
                          {"entropy_per_token", p.tokens ? p.entropy / double(p.tokens) : 0.0}};
  }
  return {{"spec", to_json(raw.spec)}, {"splits", splits}};
}

Dataset build_dataset(const RawDataset& raw, const LoadOptions& opts) {
  Dataset d;
  const bool is_set = raw.spec.task == "setquery";
  d.task = is_set ? TaskKind::set : TaskKind::sequence;
  d.meta = dataset_meta(raw);
  std::vector<RawExample> train;
  for (const auto& r : raw.train.examples)
    if (!too_long(r, opts)) train.push_back(r);
  d.src = Vocab(source_reserved(), count(train, false), opts.cutoff);
  d.tgt = is_set ? Vocab({}, count(train, true), 1) : Vocab(target_reserved(), count(train, true), opts.cutoff);
  if (is_set && !train.empty()) d.feature_dim = train[0].features.rows();
  auto convert = [&](const std::vector<RawExample>& xs, std::vector<Example>& out) {
    for (const auto& r : xs) {
      if (too_long(r, opts)) continue;
      if (is_set && r.features.rows() != d.feature_dim) throw InputError("inconsistent feature sizes across examples");
      out.push_back(to_example(r, d.src, d.tgt, is_set));
    }
  };
  convert(train, d.train);
  convert(raw.valid.examples, d.valid);
  convert(raw.test.examples, d.test);
  return d;
}

void write_dataset(const RawDataset& raw, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const bool is_set = raw.spec.task == "setquery";
  const RawSplit* parts[3] = {&raw.train, &raw.valid, &raw.test};
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<std::string> src, tgt, align, feat;
    for (const auto& ex : parts[s]->examples) {
      src.push_back(join(ex.src));
      tgt.push_back(join(ex.tgt));
      std::vector<std::string> pairs;
      for (std::size_t j = 0; j < ex.gold.size(); ++j) {
        if (ex.gold[j] >= 0) pairs.push_back(std::to_string(ex.gold[j]) + "-" + std::to_string(j));
      }
      align.push_back(join(pairs));
      if (is_set) feat.push_back(feature_line(ex.features));
    }
    const std::string name = kSplits[s];
    write_lines(dir / (name + ".src"), src);
    write_lines(dir / (name + ".tgt"), tgt);
    write_lines(dir / (name + ".align"), align);
    if (is_set) write_lines(dir / (name + ".feat"), feat);
  }
  std::ofstream meta(dir / "meta.json", std::ios::binary);
  if (!meta) throw IoError("cannot write " + (dir / "meta.json").string());
  meta << dataset_meta(raw).dump(2) << '\n';
}

Dataset load_dataset(const fs::path& dir, const LoadOptions& opts) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory " + dir.string() + " does not exist");
  RawDataset raw;
  nlohmann::json meta;
  const fs::path mp = dir / "meta.json";
  if (fs::exists(mp)) {
    std::ifstream in(mp);
    try {
      meta = nlohmann::json::parse(in);
      raw.spec = task_spec_from_json(meta.at("spec"));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(mp.string() + ": " + e.what());
    }
  } else {
    raw.spec.task = fs::exists(dir / "train.feat") ? "setquery" : "lexicon";
  }
  const bool is_set = raw.spec.task == "setquery";
  RawSplit* parts[3] = {&raw.train, &raw.valid, &raw.test};
  for (std::size_t s = 0; s < 3; ++s) {
    const std::string name = kSplits[s];
    if (!fs::exists(dir / (name + ".src"))) {
      if (s == 0) throw IoError("dataset " + dir.string() + " has no train split");
      continue;
    }
    parts[s]->examples = read_split(dir, name, is_set);
    if (meta.contains("splits") && meta["splits"].contains(name)) {
      parts[s]->entropy = meta["splits"][name].value("entropy", 0.0);
      parts[s]->tokens = meta["splits"][name].value("tokens", std::size_t{0});
    }
  }
  Dataset d = build_dataset(raw, opts);
  if (!meta.is_null()) d.meta = meta;
  return d;
}

}  // namespace laln
