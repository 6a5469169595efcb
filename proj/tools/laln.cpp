// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "CLI11.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "laln/error.hpp"
#include "laln/infer/infer.hpp"
#include "laln/parallel.hpp"
#include "laln/tasks/tasks.hpp"
#include "laln/train/train.hpp"

#ifndef LALN_VERSION
#define LALN_VERSION "unknown"
#endif

using namespace laln;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 2, kConfig = 3, kData = 4, kDiverged = 5 };

void note(const std::string& msg) { std::cerr << "[laln] " << msg << '\n'; }

json read_json(const fs::path& p, bool config) {
  std::ifstream in(p);
  if (!in) {
    if (config) throw ConfigError("cannot open " + p.string());
    throw IoError("cannot open " + p.string());
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    const std::string msg = p.string() + ": " + e.what();
    if (config) throw ConfigError(msg);
    throw InputError(msg);
  }
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + p.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

/// Written before any computation and finalised on exit, so interrupted runs
/// are left marked incomplete.
class Manifest {
 public:
  Manifest(fs::path out, std::vector<std::string> argv) : path_(std::move(out) / "manifest.json") {
    doc_ = {{"command", argv}, {"version", LALN_VERSION}, {"status", "incomplete"}};
  }
  void set(const std::string& key, json v) { doc_[key] = std::move(v); }
  void begin() {
    make_dir(path_.parent_path());
    write_json(path_, doc_);
  }
  void finish(const std::string& status, const std::string& message = {}) {
    doc_["status"] = status;
    if (!message.empty()) doc_["message"] = message;
    write_json(path_, doc_);
  }

 private:
  fs::path path_;
  json doc_;
};

struct Common {
  long threads = 0;
  std::vector<std::string> argv;
};

struct LoadedRun {
  TrainConfig config;
  Dataset data;
  TrainedModel model;
};

fs::path dataset_of_run(const fs::path& run, const std::string& data_flag) {
  if (!data_flag.empty()) return data_flag;
  const fs::path m = run / "manifest.json";
  if (fs::exists(m)) {
    const json j = read_json(m, false);
    if (j.contains("dataset")) return j["dataset"].get<std::string>();
  }
  throw ConfigError("no --data given and " + run.string() + " does not record its dataset");
}

LoadedRun load_run(const fs::path& run, const std::string& data_flag) {
  const fs::path ckpt = run / "model.bin";
  if (!fs::exists(ckpt)) throw IoError("missing checkpoint " + ckpt.string());
  LoadedRun r;
  r.config = train_config_from_json(read_json(run / "config.json", true));
  r.data = load_dataset(dataset_of_run(run, data_flag));
  r.model = make_model(r.config, r.data);
  load_checkpoint(ckpt, r.model);
  return r;
}

const std::vector<Example>& split_of(const Dataset& d, const std::string& name) {
  if (name == "train") return d.train;
  if (name == "valid") return d.valid;
  if (name == "test") return d.test;
  throw ConfigError("unknown split '" + name + "' (train, valid, test)");
}

// ---- gen

struct GenOptions {
  std::string config;
  std::string out;
  TaskSpec spec;
  std::string reorder = "monotone";
};

int cmd_gen(const GenOptions& o, const CLI::App& sub, const Common& common) {
  Manifest manifest(o.out, common.argv);
  manifest.set("out", o.out);
  manifest.begin();
  TaskSpec spec = o.spec;
  if (!o.config.empty()) {
    manifest.set("config", o.config);
    spec = task_spec_from_json(read_json(o.config, true));
    // Explicit flags win over the config file.
    auto given = [&](const char* flag) { return sub.count(flag) > 0; };
    if (given("--task")) spec.task = o.spec.task;
    if (given("--vocab")) spec.vocab = o.spec.vocab;
    if (given("--attributes")) spec.attributes = o.spec.attributes;
    if (given("--min-len")) spec.min_len = o.spec.min_len;
    if (given("--max-len")) spec.max_len = o.spec.max_len;
    if (given("--eps")) spec.eps = o.spec.eps;
    if (given("--kappa")) spec.kappa = o.spec.kappa;
    if (given("--seed")) spec.seed = o.spec.seed;
    if (given("--train")) spec.train = o.spec.train;
    if (given("--valid")) spec.valid = o.spec.valid;
    if (given("--test")) spec.test = o.spec.test;
    if (given("--reorder")) spec.reorder = parse_reorder(o.reorder);
  } else {
    spec.reorder = parse_reorder(o.reorder);
  }
  try {
    spec.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  manifest.set("seed", spec.seed);
  manifest.set("spec", to_json(spec));
  const RawDataset raw = generate(spec);
  write_dataset(raw, o.out);
  note("wrote " + std::to_string(raw.train.examples.size()) + "/" + std::to_string(raw.valid.examples.size()) + "/" +
       std::to_string(raw.test.examples.size()) + " examples to " + o.out);
  manifest.finish("completed");
  return kOk;
}

// ---- train

struct TrainOptions {
  std::string config, data, out, objective;
  long seed = -1;
  long epochs = -1;
};

int cmd_train(const TrainOptions& o, const Common& common) {
  Manifest manifest(o.out, common.argv);
  manifest.set("config", o.config);
  manifest.set("dataset", fs::absolute(o.data).string());
  manifest.set("out", o.out);
  manifest.begin();

  json cj = read_json(o.config, true);
  if (!cj.is_object()) throw ConfigError(o.config + ": training config must be a JSON object");
  if (!o.objective.empty()) cj["objective"] = o.objective;
  if (o.seed >= 0) cj["seed"] = o.seed;
  if (o.epochs >= 0) cj["epochs"] = o.epochs;
  if (common.threads > 0) cj["threads"] = common.threads;
  const TrainConfig cfg = train_config_from_json(cj);
  manifest.set("seed", cfg.seed);
  const Dataset data = load_dataset(o.data);

  const fs::path record_path = fs::path(o.out) / "record.jsonl";
  std::ofstream record(record_path, std::ios::trunc);
  if (!record) throw IoError("cannot write " + record_path.string());
  TrainHooks hooks;
  hooks.log = [](const std::string& s) { note(s); };
  hooks.on_epoch = [&](const EpochRecord& e) {
    record << to_json(e).dump() << '\n';
    record.flush();
    std::ostringstream os;
    os << "epoch " << e.epoch << " (" << e.phase << ") loss " << e.train_loss << " val " << e.val_nll;
    note(os.str());
  };
  note("training " + cfg.objective + " on " + std::to_string(data.train.size()) + " examples");
  TrainResult result = train(cfg, data, hooks);
  write_json(fs::path(o.out) / "config.json", result.record.config);
  save_checkpoint(fs::path(o.out) / "model.bin", result.trained);
  write_json(fs::path(o.out) / "summary.json", summary_json(result.record));
  if (result.record.status == "diverged") {
    manifest.finish("diverged", result.record.message);
    note("diverged: " + result.record.message);
    return kDiverged;
  }
  manifest.finish("completed");
  return kOk;
}

// ---- eval

struct EvalOptions {
  std::string run, data, out, split = "test", mode;
  DecodeConfig decode;
  bool decode_beam = false;
};

int cmd_eval(EvalOptions o, const CLI::App& sub, const Common& common) {
  const fs::path out = o.out.empty() ? fs::path(o.run) / ("eval-" + o.split) : fs::path(o.out);
  Manifest manifest(out, common.argv);
  manifest.set("run", o.run);
  manifest.set("out", out.string());
  manifest.begin();
  LoadedRun r = load_run(o.run, o.data);
  manifest.set("dataset", dataset_of_run(o.run, o.data).string());
  o.decode.mode = o.mode.empty() ? default_mode(parse_objective(r.config.objective)) : parse_mode(o.mode);
  if (!sub.count("--seed")) o.decode.seed = r.config.seed;
  manifest.set("seed", o.decode.seed);
  o.decode.validate();
  const std::size_t threads = resolve_threads(common.threads);
  const auto& examples = split_of(r.data, o.split);
  json j = to_json(evaluate(*r.model.model, r.model.net.get(), examples, o.decode, threads));
  j["split"] = o.split;
  j["objective"] = r.config.objective;
  if (o.decode_beam && r.data.task == TaskKind::sequence) {
    std::vector<int> hit(examples.size());
    parallel_for(examples.size(), threads, [&](std::size_t n) {
      const auto& ex = examples[n];
      std::vector<std::size_t> gold(ex.tgt.begin(), ex.tgt.end() - 1);
      hit[n] = beam_decode(*r.model.model, ex.src, o.decode) == gold;
    });
    double acc = 0.0;
    for (int h : hit) acc += h;
    j["beam"] = o.decode.beam;
    j["alpha"] = o.decode.alpha;
    j["exact_match"] = examples.empty() ? 0.0 : acc / double(examples.size());
  }
  write_json(out / "metrics.json", j);
  std::cout << j.dump() << '\n';
  manifest.finish("completed");
  return kOk;
}

// ---- compare

struct CompareOptions {
  std::vector<std::string> runs;
  std::string data, out, split = "test";
  std::size_t K = 5;
};

std::string model_name(Objective o) {
  switch (o) {
    case Objective::soft: return "Soft Attention";
    case Objective::marginal: return "Marginal Likelihood";
    case Objective::hard_enum:
    case Objective::hard_sample: return "Hard Attention";
    case Objective::var_dirichlet: return "Variational Relaxed Attention";
    case Objective::var_gumbel: return "Variational Attention (Gumbel)";
    case Objective::rws: return "Variational Attention (RWS)";
    default: return "Variational Attention";
  }
}

std::string objective_formula(Objective o) {
  switch (o) {
    case Objective::soft: return "log p(y \\| E[z])";
    case Objective::marginal: return "log E[p]";
    case Objective::hard_enum:
    case Objective::hard_sample: return "E_p[log p]";
    default: return "E_q[log p] - KL";
  }
}

std::string expectation_mode(Objective o) {
  switch (o) {
    case Objective::soft: return "-";
    case Objective::marginal:
    case Objective::hard_enum:
    case Objective::var_enum: return "Enum";
    case Objective::var_gumbel: return "Relaxed";
    default: return "Sample";
  }
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

int cmd_compare(const CompareOptions& o, const Common& common) {
  Manifest manifest(o.out, common.argv);
  manifest.set("runs", o.runs);
  manifest.set("out", o.out);
  manifest.begin();
  const std::size_t threads = resolve_threads(common.threads);
  json rows = json::array();
  std::ostringstream md;
  md << "| Model | Objective | E | NLL | PPL | Exact NLL | K-max NLL (K=" << o.K
     << ") | Entropy p | Bounds >= NLL | ELBO <= Jensen |\n";
  md << "|---|---|---|---|---|---|---|---|---|---|\n";
  std::map<std::string, double> entropy;
  for (const auto& run : o.runs) {
    LoadedRun r = load_run(run, o.data);
    const Objective obj = parse_objective(r.config.objective);
    const auto& examples = split_of(r.data, o.split);
    const Model& model = *r.model.model;
    const InferenceNet* net = r.model.net.get();
    DecodeConfig own;
    own.mode = default_mode(obj);
    own.seed = r.config.seed;
    own.S = r.config.eval_samples;
    const NllResult nll = predictive_nll(model, examples, own, threads);
    json row{{"run", run},
             {"objective", r.config.objective},
             {"model", model_name(obj)},
             {"expectation", expectation_mode(obj)},
             {"nll", nll.per_token()},
             {"ppl", nll.ppl()}};
    std::string exact = "-", kmax = "-", valid = "-", tighter = "-";
    if (objective_prior(obj) == PriorKind::categorical) {
      DecodeConfig e;
      const double exact_nll = predictive_nll(model, examples, e, threads).per_token();
      e.mode = PredictMode::kmax;
      e.K = o.K;
      const double kmax_nll = predictive_nll(model, examples, e, threads).per_token();
      row["exact_nll"] = exact_nll;
      row["kmax_nll"] = kmax_nll;
      exact = fixed(exact_nll);
      kmax = fixed(kmax_nll);
      // Per-example checks in NLL terms: both bounds sit above the exact
      // marginal; the ELBO only beats Jensen once q improves on p.
      std::vector<int> above(examples.size()), beats(examples.size());
      parallel_for(examples.size(), threads, [&](std::size_t n) {
        nk::Binding b(false);
        const Encoded enc = encode(model, examples[n], bind_weights(model.params(), b));
        const double jensen = jensen_nll(enc).item();
        const double marginal = exact_marginal_nll(enc).item();
        const double elbo =
            net ? elbo_nll(enc, infer(*net, examples[n], bind_weights(net->params(), b))).item() : jensen;
        const double tol = 1e-9 * (1.0 + std::abs(marginal));
        above[n] = jensen + tol >= marginal && elbo + tol >= marginal;
        beats[n] = elbo <= jensen + tol;
      });
      auto rate = [&](const std::vector<int>& v) {
        double r = 0.0;
        for (int x : v) r += x;
        return v.empty() ? 0.0 : r / double(v.size());
      };
      row["bounds_above_nll_rate"] = rate(above);
      row["elbo_tighter_rate"] = rate(beats);
      valid = fixed(rate(above), 3);
      tighter = fixed(rate(beats), 3);
    }
    const EntropyReport ent = entropy_report(model, net, examples, threads);
    row["entropy_p"] = ent.prior;
    if (ent.posterior) row["entropy_q"] = *ent.posterior;
    entropy[r.config.objective] = ent.prior;
    rows.push_back(row);
    md << "| " << model_name(obj) << " | " << objective_formula(obj) << " | " << expectation_mode(obj) << " | "
       << fixed(nll.per_token()) << " | " << fixed(nll.ppl(), 3) << " | " << exact << " | " << kmax << " | "
       << fixed(ent.prior, 3) << " | " << valid << " | " << tighter << " |\n";
  }
  json result{{"split", o.split}, {"K", o.K}, {"rows", rows}};
  auto pick = [&](std::initializer_list<const char*> ids) -> std::optional<double> {
    for (const char* id : ids)
      if (entropy.count(id)) return entropy[id];
    return std::nullopt;
  };
  const auto hard = pick({"hard-enum", "hard-sample"});
  const auto var = pick({"var-enum", "var-sample", "var-gumbel", "rws"});
  const auto soft = pick({"soft"});
  if (hard && var && soft) {
    const bool ordered = *hard < *var && *var < *soft;
    result["entropy_order_hard_var_soft"] = ordered;
    md << "\nEntropy ordering hard < variational < soft: " << (ordered ? "holds" : "does not hold") << "\n";
  }
  write_json(fs::path(o.out) / "compare.json", result);
  std::ofstream(fs::path(o.out) / "compare.md") << md.str();
  std::cout << md.str();
  manifest.finish("completed");
  return kOk;
}

// ---- export

struct ExportOptions {
  std::string run, data, out, split = "test";
  std::size_t index = 0, count = 1;
};

int cmd_export(const ExportOptions& o, const Common& common) {
  Manifest manifest(o.out, common.argv);
  manifest.set("run", o.run);
  manifest.set("out", o.out);
  manifest.begin();
  LoadedRun r = load_run(o.run, o.data);
  const auto& examples = split_of(r.data, o.split);
  if (o.index >= examples.size()) {
    throw ConfigError("index " + std::to_string(o.index) + " outside the " + o.split + " split of " +
                      std::to_string(examples.size()) + " examples");
  }
  const std::size_t end = std::min(examples.size(), o.index + o.count);
  for (std::size_t n = o.index; n < end; ++n) {
    const fs::path dir = o.count == 1 ? fs::path(o.out) : fs::path(o.out) / std::to_string(n);
    for (const auto& p : export_alignments(*r.model.model, r.model.net.get(), examples[n], dir)) note("wrote " + p.string());
  }
  manifest.finish("completed");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent alignment models: data generation, training, evaluation and exports"};
  app.require_subcommand(1);
  app.set_version_flag("--version", LALN_VERSION);
  Common common;
  for (int i = 0; i < argc; ++i) common.argv.emplace_back(argv[i]);

  auto threads_flag = [&](CLI::App* sub) {
    sub->add_option("--threads", common.threads, "Worker threads (default: LALN_THREADS or 1)")
        ->check(CLI::NonNegativeNumber);
  };

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--config", gen.config, "Task spec JSON; flags override it");
  g->add_option("--task", gen.spec.task, "lexicon or setquery")->check(CLI::IsMember({"lexicon", "setquery"}));
  g->add_option("--vocab", gen.spec.vocab, "Vocabulary size (classes for setquery)");
  g->add_option("--attributes", gen.spec.attributes, "Attribute count for setquery");
  g->add_option("--min-len", gen.spec.min_len, "Minimum length");
  g->add_option("--max-len", gen.spec.max_len, "Maximum length");
  g->add_option("--eps", gen.spec.eps, "Emission noise");
  g->add_option("--kappa", gen.spec.kappa, "Alignment concentration");
  g->add_option("--reorder", gen.reorder, "monotone, swap or reverse");
  g->add_option("--seed", gen.spec.seed, "Seed");
  g->add_option("--train", gen.spec.train, "Training examples");
  g->add_option("--valid", gen.spec.valid, "Validation examples");
  g->add_option("--test", gen.spec.test, "Test examples");
  threads_flag(g);

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", tr.config, "Training config JSON")->required();
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--objective", tr.objective, "Override the config objective");
  t->add_option("--seed", tr.seed, "Override the config seed")->check(CLI::NonNegativeNumber);
  t->add_option("--epochs", tr.epochs, "Override the config epoch count")->check(CLI::PositiveNumber);
  threads_flag(t);

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Evaluate a trained run");
  e->add_option("--run", ev.run, "Run directory")->required();
  e->add_option("--data", ev.data, "Dataset directory (default: the one used for training)");
  e->add_option("--out", ev.out, "Output directory (default: <run>/eval-<split>)");
  e->add_option("--split", ev.split, "train, valid or test");
  e->add_option("--mode", ev.mode, "exact, kmax, sample or soft (default: the objective's natural mode)");
  e->add_option("--K", ev.decode.K, "K for kmax")->check(CLI::PositiveNumber);
  e->add_option("--S", ev.decode.S, "Samples for sample mode")->check(CLI::PositiveNumber);
  e->add_option("--beam", ev.decode.beam, "Also beam-decode with this beam size")->check(CLI::PositiveNumber);
  e->add_option("--alpha", ev.decode.alpha, "Length-penalty exponent")->check(CLI::NonNegativeNumber);
  e->add_option("--seed", ev.decode.seed, "Sampling seed (default: the run seed)");
  threads_flag(e);

  CompareOptions cmp;
  auto* c = app.add_subcommand("compare", "Compare runs in a summary table");
  c->add_option("--runs", cmp.runs, "Run directories")->required();
  c->add_option("--data", cmp.data, "Dataset directory (default: each run's own)");
  c->add_option("--out", cmp.out, "Output directory")->required();
  c->add_option("--split", cmp.split, "train, valid or test");
  c->add_option("--K", cmp.K, "K for the K-max column")->check(CLI::PositiveNumber);
  threads_flag(c);

  ExportOptions ex;
  auto* x = app.add_subcommand("export", "Export alignment heatmaps as TSV");
  x->add_option("--run", ex.run, "Run directory")->required();
  x->add_option("--data", ex.data, "Dataset directory (default: the one used for training)");
  x->add_option("--out", ex.out, "Output directory")->required();
  x->add_option("--split", ex.split, "train, valid or test");
  x->add_option("--index", ex.index, "First example");
  x->add_option("--count", ex.count, "Number of examples")->check(CLI::PositiveNumber);
  threads_flag(x);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    resolve_threads(common.threads);
    if (*g) return cmd_gen(gen, *g, common);
    if (*t) return cmd_train(tr, common);
    if (*e) {
      ev.decode_beam = e->count("--beam") > 0;
      return cmd_eval(ev, *e, common);
    }
    if (*c) return cmd_compare(cmp, common);
    if (*x) return cmd_export(ex, common);
  } catch (const ConfigError& err) {
    note(std::string("config error: ") + err.what());
    return kConfig;
  } catch (const ParameterError& err) {
    note(std::string("config error: ") + err.what());
    return kConfig;
  } catch (const InputError& err) {
    note(std::string("data error: ") + err.what());
    return kData;
  } catch (const IoError& err) {
    note(std::string("i/o error: ") + err.what());
    return kData;
  } catch (const NumericError& err) {
    note(std::string("numerical error: ") + err.what());
    return kDiverged;
  } catch (const std::exception& err) {
    note(std::string("error: ") + err.what());
    return 1;
  }
  return kUsage;
}
