// Copyright 2026 The cdiff Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cdiff/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cdiff/checks.hpp"
#include "cdiff/constraint.hpp"
#include "cdiff/corpus_io.hpp"
#include "cdiff/denoiser.hpp"
#include "cdiff/metrics.hpp"
#include "json.hpp"

namespace cdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ------------------------------------------------------------ config parsing

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

fs::path resolve(const json& obj, const char* key, const fs::path& base) {
  if (!obj.contains(key)) return {};
  const fs::path p(obj.at(key).get<std::string>());
  return p.is_absolute() ? p : base / p;
}

AlmConfig parse_alm(const json& j, AlmConfig a) {
  reject_unknown(j,
                 {"lambda_init", "mu_init", "mu_max", "alpha_scale", "eta", "delta", "max_inner_iter", "max_outer_iter",
                  "polish", "step_rule", "temperature", "stochastic"},
                 "alm");
  if (j.contains("lambda_init")) {
    const json& l = j.at("lambda_init");
    a.lambda_init = l.is_array() ? l.get<std::vector<double>>() : std::vector<double>{l.get<double>()};
  }
  read(j, "mu_init", a.mu_init);
  read(j, "mu_max", a.mu_max);
  read(j, "alpha_scale", a.alpha_scale);
  read(j, "eta", a.eta);
  read(j, "delta", a.delta);
  read(j, "max_inner_iter", a.max_inner_iter);
  read(j, "max_outer_iter", a.max_outer_iter);
  read(j, "polish", a.polish);
  read(j, "temperature", a.relax.temperature);
  read(j, "stochastic", a.relax.stochastic);
  if (j.contains("step_rule")) {
    const std::string s = j.at("step_rule").get<std::string>();
    if (s == "fixed") {
      a.step_rule = AlmConfig::Step::kFixed;
    } else if (s == "backtracking") {
      a.step_rule = AlmConfig::Step::kBacktracking;
    } else if (s == "adaptive") {
      a.step_rule = AlmConfig::Step::kAdaptive;
    } else {
      throw ConfigError("alm: unknown step_rule '" + s + "'");
    }
  }
  return a;
}

SampleConfig parse_sample(const json& j, SampleConfig s, bool& length_set) {
  reject_unknown(j,
                 {"steps", "kernel", "schedule", "length", "num_samples", "projection", "project_every",
                  "project_start", "infeasible_policy", "smoothing", "warm_start", "trace", "trace_timing", "threads",
                  "alm"},
                 "sample");
  read(j, "steps", s.steps);
  read(j, "num_samples", s.num_samples);
  read(j, "project_every", s.project_every);
  read(j, "project_start", s.project_start);
  read(j, "smoothing", s.smoothing);
  read(j, "warm_start", s.warm_start);
  read(j, "trace", s.trace);
  read(j, "trace_timing", s.trace_timing);
  read(j, "threads", s.threads);
  if (j.contains("length")) {
    read(j, "length", s.length);
    length_set = true;
  }
  try {
    if (j.contains("kernel")) s.kernel = parse_kernel_kind(j.at("kernel").get<std::string>());
    if (j.contains("schedule")) s.schedule = parse_schedule_kind(j.at("schedule").get<std::string>());
    if (j.contains("projection")) s.projection = parse_projection_mode(j.at("projection").get<std::string>());
    if (j.contains("infeasible_policy")) {
      s.infeasible_policy = parse_infeasible_policy(j.at("infeasible_policy").get<std::string>());
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sample: ") + e.what());
  }
  if (j.contains("alm")) s.alm = parse_alm(j.at("alm"), s.alm);
  return s;
}

AblationGrid parse_grid(const json& j) {
  reject_unknown(j, {"eta", "mu_init", "max_inner_iter", "project_every", "project_start", "repeats"}, "ablation");
  AblationGrid g;
  read(j, "eta", g.eta);
  read(j, "mu_init", g.mu_init);
  read(j, "max_inner_iter", g.max_inner_iter);
  read(j, "project_every", g.project_every);
  read(j, "project_start", g.project_start);
  read(j, "repeats", g.repeats);
  if (g.repeats < 1) throw ConfigError("ablation: repeats must be >= 1");
  return g;
}

OracleCheckOptions parse_oracle(const json& j) {
  reject_unknown(j,
                 {"denoiser_cases", "projection_cases", "position_cases", "novelty_cases", "projection_max_length",
                  "projection_max_vocab", "novelty_max_space", "corrupt_denoiser"},
                 "oracle_check");
  OracleCheckOptions o;
  read(j, "denoiser_cases", o.denoiser_cases);
  read(j, "projection_cases", o.projection_cases);
  read(j, "position_cases", o.position_cases);
  read(j, "novelty_cases", o.novelty_cases);
  read(j, "projection_max_length", o.projection_max_length);
  read(j, "projection_max_vocab", o.projection_max_vocab);
  read(j, "novelty_max_space", o.novelty_max_space);
  read(j, "corrupt_denoiser", o.corrupt_denoiser);
  return o;
}

// -------------------------------------------------------------- run helpers

struct Inputs {
  Vocabulary vocab;
  Corpus corpus;
  std::optional<ConstraintSet> cs;
};

Inputs load_inputs(const RunConfig& cfg) {
  if (cfg.vocab.empty()) throw ConfigError("config: 'vocab' is required");
  if (cfg.corpus.empty()) throw ConfigError("config: 'corpus' is required");
  Vocabulary vocab = load_vocabulary(cfg.vocab);
  Corpus corpus = load_corpus(cfg.corpus, vocab);
  std::optional<ConstraintSet> cs;
  if (!cfg.constraints.empty()) cs = load_constraint_spec(cfg.constraints, vocab);
  return {std::move(vocab), std::move(corpus), std::move(cs)};
}

SampleConfig effective(const RunConfig& cfg, const Inputs& in) {
  SampleConfig s = cfg.sample;
  if (cfg.length_from_corpus) s.length = in.corpus.length();
  return s;
}

SampleRun run_sampling(const Inputs& in, const SampleConfig& s) {
  if (s.projection == ProjectionMode::kNovelty) {
    NoveltyDb db(in.corpus.sequences());
    return sample_novel(in.corpus, in.vocab, db, s);
  }
  if (s.projection == ProjectionMode::kNone) {
    if (s.length != in.corpus.length()) throw ConfigError("sample length differs from the corpus length");
    ExactDenoiser den(std::make_shared<const Corpus>(in.corpus), in.vocab.size());
    return Sampler(NoiseKernel::for_vocabulary(s.kernel, in.vocab), den, s).run();
  }
  if (!in.cs) throw ConfigError("projection '" + std::string(to_string(s.projection)) + "' needs 'constraints'");
  return sample_constrained(in.corpus, in.vocab, *in.cs, s);
}

MetricsSummary metrics_for(const Inputs& in, const std::vector<Sequence>& seqs, double kappa) {
  const BigramModel model(in.corpus, in.vocab.size(), kappa);
  const NoveltyDb db(in.corpus.sequences());
  return summarize(seqs, model, in.cs ? &*in.cs : nullptr, &db);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw ParseError("cannot write " + p.string());
  f << std::setprecision(12);
  return f;
}

void write_trace(const fs::path& p, const std::vector<TraceRecord>& trace) {
  auto f = open_out(p);
  f << "sample,step,t,projected,violation_before,violation_after,kl_moved,outer_iters,retries,feasible,wall_seconds\n";
  for (const auto& r : trace) {
    f << r.sample << ',' << r.step << ',' << r.t << ',' << r.projected << ',' << r.violation_before << ','
      << r.violation_after << ',' << r.kl_moved << ',' << r.outer_iters << ',' << r.retries << ',' << r.feasible << ','
      << r.wall_seconds << '\n';
  }
}

fs::path prepare_output(const RunConfig& cfg) {
  if (cfg.output_dir.empty()) throw ConfigError("config: 'output_dir' is required (or pass --out)");
  fs::create_directories(cfg.output_dir);
  return cfg.output_dir;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

// ------------------------------------------------------------------- config

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, {"vocab", "corpus", "constraints", "output_dir", "samples", "seed", "kappa", "sample", "ablation",
                     "oracle_check"},
                 "config");
  RunConfig cfg;
  try {
    cfg.vocab = resolve(j, "vocab", base_dir);
    cfg.corpus = resolve(j, "corpus", base_dir);
    cfg.constraints = resolve(j, "constraints", base_dir);
    cfg.output_dir = resolve(j, "output_dir", base_dir);
    cfg.samples = resolve(j, "samples", base_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("paths must be strings: ") + e.what());
  }
  bool length_set = false;
  if (j.contains("sample")) cfg.sample = parse_sample(j.at("sample"), cfg.sample, length_set);
  cfg.length_from_corpus = !length_set;
  read(j, "seed", cfg.sample.seed);
  read(j, "kappa", cfg.kappa);
  if (!(cfg.kappa > 0.0)) throw ConfigError("kappa must be > 0");
  if (j.contains("ablation")) cfg.ablation = parse_grid(j.at("ablation"));
  if (j.contains("oracle_check")) cfg.oracle = parse_oracle(j.at("oracle_check"));
  try {
    cfg.sample.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sample: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

// ----------------------------------------------------------------- commands

int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Inputs in = load_inputs(cfg);
    const SampleConfig s = effective(cfg, in);
    const fs::path dir = prepare_output(cfg);
    const SampleRun run = run_sampling(in, s);

    auto samples = open_out(dir / "samples.txt");
    write_sequences(samples, run.sequences, in.vocab);
    write_trace(dir / "trace.csv", run.trace);
    const MetricsSummary m = metrics_for(in, run.sequences, cfg.kappa);
    open_out(dir / "metrics.json") << to_json(m);

    const auto infeasible = std::count(run.feasible.begin(), run.feasible.end(), false);
    out << "wrote " << run.sequences.size() << " samples to " << dir.string() << " (violation_rate "
        << m.violation_rate << ")\n";
    if (infeasible > 0) {
      err << infeasible << " final samples are infeasible\n";
      return kExitInfeasible;
    }
    return kExitOk;
  });
}

int cmd_oracle_check(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const OracleCheckOptions& o = cfg.oracle;
    std::size_t proj_space = 1;
    for (std::size_t i = 0; i < o.projection_max_length; ++i) proj_space *= o.projection_max_vocab;
    if (o.novelty_max_space > kMaxOracleSpace) throw ConfigError("oracle_check: novelty_max_space above limit");
    if (proj_space > kMaxProjectionSpace) throw ConfigError("oracle_check: projection instance space above limit");
    if (o.projection_max_length < 1 || o.projection_max_vocab < 2) {
      throw ConfigError("oracle_check: projection sizes need L >= 1 and N >= 2");
    }
    const Inputs in = load_inputs(cfg);
    if (in.corpus.size() > kMaxOracleCorpus) throw ConfigError("oracle_check: corpus above size limit");

    checks::PosteriorFn posterior;
    if (o.corrupt_denoiser) {
      posterior = [](const Corpus& c, const NoiseKernel& k, const Sequence& xt, double a_t) {
        auto p = exact_posterior(c, k, xt, a_t);
        if (!p) return p;
        std::vector<double> w = p->values();
        const std::size_t n = p->vocab_size();
        w[argmax(p->row(0))] += 1e-6;
        return std::optional<SeqDist>(SeqDist::normalized(p->length(), n, std::move(w)));
      };
    }
    const std::uint64_t seed = cfg.sample.seed;
    const std::vector<checks::SuiteResult> results{
        checks::denoiser_suite(in.corpus, in.vocab, o.denoiser_cases, seed, 1e-12, posterior),
        checks::projection_suite(o.projection_cases, seed, o.projection_max_length, o.projection_max_vocab),
        checks::position_suite(o.position_cases, seed),
        checks::novelty_suite(o.novelty_cases, seed, o.novelty_max_space),
    };
    bool ok = true;
    out << std::left << std::setw(12) << "suite" << std::setw(8) << "cases" << std::setw(10) << "failures"
        << std::setw(12) << "worst" << "status\n";
    for (const auto& r : results) {
      out << std::left << std::setw(12) << r.name << std::setw(8) << r.cases << std::setw(10) << r.failures
          << std::setw(12) << std::setprecision(3) << r.worst << (r.passed() ? "PASS" : "FAIL");
      if (!r.detail.empty()) out << "  " << r.detail;
      out << '\n';
      ok = ok && r.passed();
    }
    return ok ? kExitOk : kExitUsage;
  });
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!cfg.ablation) throw ConfigError("ablate: config has no 'ablation' grid");
    const AblationGrid& g = *cfg.ablation;
    const Inputs in = load_inputs(cfg);
    const SampleConfig base = effective(cfg, in);
    auto axis = [](const auto& v, auto fallback) { return v.empty() ? std::vector{fallback} : v; };
    const auto etas = axis(g.eta, base.alm.eta);
    const auto mus = axis(g.mu_init, base.alm.mu_init);
    const auto inners = axis(g.max_inner_iter, base.alm.max_inner_iter);
    const auto everys = axis(g.project_every, base.project_every);
    const auto starts = axis(g.project_start, base.project_start);
    if (g.eta.empty() && g.mu_init.empty() && g.max_inner_iter.empty() && g.project_every.empty() &&
        g.project_start.empty()) {
      throw ConfigError("ablate: empty grid");
    }
    const fs::path dir = prepare_output(cfg);
    auto csv = open_out(dir / "ablation.csv");
    csv << "eta,mu_init,max_inner_iter,project_every,project_start,status,violation_rate,mean_perplexity,"
           "median_perplexity,mean_entropy,runtime_seconds\n";
    bool all_ok = true;
    for (double eta : etas) {
      for (double mu : mus) {
        for (int inner : inners) {
          for (int every : everys) {
            for (int start : starts) {
              SampleConfig s = base;
              s.alm.eta = eta;
              s.alm.mu_init = mu;
              s.alm.mu_max = std::max(s.alm.mu_max, mu);
              s.alm.max_inner_iter = inner;
              s.project_every = every;
              s.project_start = start;
              s.trace = false;
              s.validate();
              std::vector<double> times;
              std::optional<MetricsSummary> m;
              bool infeasible = false;
              for (int rep = 0; rep < g.repeats; ++rep) {
                const auto t0 = std::chrono::steady_clock::now();
                try {
                  const SampleRun run = run_sampling(in, s);
                  times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
                  if (!m) m = metrics_for(in, run.sequences, cfg.kappa);
                } catch (const InfeasibleError& e) {
                  err << "cell eta=" << eta << " mu_init=" << mu << " inner=" << inner << " every=" << every
                      << " start=" << start << ": " << e.what() << '\n';
                  infeasible = true;
                  break;
                }
              }
              csv << eta << ',' << mu << ',' << inner << ',' << every << ',' << start << ',';
              if (infeasible) {
                csv << "infeasible,,,,,\n";
                all_ok = false;
                continue;
              }
              if (m->violation_rate > 0.0) all_ok = false;
              csv << "ok," << m->violation_rate << ',' << m->mean_perplexity << ',' << m->median_perplexity << ','
                  << m->mean_entropy << ',' << median(times) << '\n';
              out << "cell eta=" << eta << " mu_init=" << mu << " inner=" << inner << " every=" << every
                  << " start=" << start << ": violation_rate " << m->violation_rate << '\n';
            }
          }
        }
      }
    }
    return all_ok ? kExitOk : kExitInfeasible;
  });
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Inputs in = load_inputs(cfg);
    fs::path src = cfg.samples;
    if (src.empty()) {
      if (cfg.output_dir.empty()) throw ConfigError("eval: set 'samples' or 'output_dir'");
      src = cfg.output_dir / "samples.txt";
    }
    const std::vector<Sequence> seqs = load_sequences(src, in.vocab);
    const std::string text = to_json(metrics_for(in, seqs, cfg.kappa));
    if (!cfg.output_dir.empty()) {
      fs::create_directories(cfg.output_dir);
      open_out(cfg.output_dir / "metrics.json") << text;
    }
    out << text;
    return kExitOk;
  });
}

// ---------------------------------------------------------------------- run

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constrained discrete diffusion sampler"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string samples_path;
  bool corrupt = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_option("--out", out_dir, "Override the output directory");
  };
  CLI::App* sample = app.add_subcommand("sample", "Draw samples and write samples.txt, trace.csv, metrics.json");
  CLI::App* check = app.add_subcommand("oracle-check", "Compare the engine against brute-force oracles");
  CLI::App* ablate = app.add_subcommand("ablate", "Run the hyper-parameter grid and write ablation.csv");
  CLI::App* eval = app.add_subcommand("eval", "Compute metrics for an existing samples file");
  for (CLI::App* sub : {sample, check, ablate, eval}) add_common(sub);
  check->add_flag("--corrupt-denoiser", corrupt, "Perturb the denoiser under test (negative control)");
  eval->add_option("--samples", samples_path, "Samples file (default: <out>/samples.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 prints help and errors through its own streams; map to our codes.
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
    if (seed) cfg.sample.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!samples_path.empty()) cfg.samples = samples_path;
    if (corrupt) cfg.oracle.corrupt_denoiser = true;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (sample->parsed()) return cmd_sample(cfg, out, err);
  if (check->parsed()) return cmd_oracle_check(cfg, out, err);
  if (ablate->parsed()) return cmd_ablate(cfg, out, err);
  return cmd_eval(cfg, out, err);
}

}  // namespace cdiff::cli
