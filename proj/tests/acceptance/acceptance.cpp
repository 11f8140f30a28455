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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cdiff/checks.hpp"
#include "cdiff/cli.hpp"
#include "cdiff/corpus_io.hpp"
#include "cdiff/denoiser.hpp"
#include "cdiff/metrics.hpp"
#include "cdiff/oracle.hpp"
#include "cdiff/sampler.hpp"

namespace fs = std::filesystem;
using namespace cdiff;

namespace {

const fs::path kToy = fs::path(CDIFF_SOURCE_DIR) / "data" / "toy";

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

struct Toy {
  Vocabulary vocab = load_vocabulary(kToy / "vocab.txt");
  Corpus corpus = load_corpus(kToy / "corpus.txt", vocab);
};

const Toy& toy() {
  static const Toy t;
  return t;
}

SampleConfig toy_config(std::size_t samples) {
  SampleConfig c;
  c.steps = 32;
  c.length = toy().corpus.length();
  c.num_samples = samples;
  c.seed = 1;
  c.threads = threads();
  return c;
}

// ------------------------------------------------------------------ criteria

Outcome zero_violation() {
  Outcome o{true, {}};
  for (const char* name : {"toxicity_025", "toxicity_05", "toxicity_075", "count_le", "count_eq", "position",
                           "forbidden"}) {
    const ConstraintSet cs = load_constraint_spec(kToy / "constraints" / (std::string(name) + ".json"), toy().vocab);
    SampleConfig cfg = toy_config(1000);
    cfg.trace = false;
    double rate = 1.0;
    try {
      rate = violation_rate(sample_constrained(toy().corpus, toy().vocab, cs, cfg).sequences, cs);
    } catch (const InfeasibleError& e) {
      o.detail += std::string(name) + " raised '" + e.what() + "' ";
    }
    o.pass = o.pass && rate == 0.0;
    o.detail += std::string(name) + "=" + fmt("%g", rate) + " ";
  }
  o.detail = "1000 samples per family, violation rate: " + o.detail;
  return o;
}

Outcome novelty() {
  NoveltyDb db(toy().corpus.sequences());
  const NoveltyDb corpus_db(toy().corpus.sequences());
  SampleConfig cfg = toy_config(500);
  cfg.projection = ProjectionMode::kNovelty;
  cfg.trace = false;
  const SampleRun run = sample_novel(toy().corpus, toy().vocab, db, cfg);
  std::size_t in_db = 0;
  for (const auto& s : run.sequences) in_db += corpus_db.contains(s) ? 1 : 0;
  const checks::SuiteResult r = checks::novelty_suite(300, 11, 4096);
  return {run.sequences.size() == 500 && in_db == 0 && r.passed(),
          "500 samples, " + std::to_string(in_db) + " in corpus; enumeration " + std::to_string(r.cases) +
              " instances, " + std::to_string(r.failures) + " mismatches"};
}

Outcome denoiser() {
  // Each case draws its own corpus, then one (mask pattern, a_t) case on it.
  std::mt19937_64 rng(7);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  int failures = 0;
  double worst = 0.0;
  const int cases = 200;
  for (int c = 0; c < cases; ++c) {
    const std::size_t n = pick(2, 6), len = pick(1, 5), size = pick(1, 25);
    std::vector<std::string> tokens;
    for (std::size_t v = 0; v < n; ++v) tokens.push_back("t" + std::to_string(v));
    tokens.push_back("[M]");
    const Vocabulary vocab(tokens, static_cast<TokenId>(n));
    std::vector<Corpus::Entry> entries;
    for (std::size_t e = 0; e < size; ++e) {
      std::vector<TokenId> ids(len);
      for (auto& t : ids) t = static_cast<TokenId>(pick(0, n - 1));
      entries.push_back({Sequence(ids), std::uniform_real_distribution<double>(0.1, 3.0)(rng)});
    }
    const auto r = checks::denoiser_suite(Corpus(std::move(entries)), vocab, 1, rng(), 1e-12);
    failures += r.failures;
    worst = std::max(worst, r.worst);
  }
  const auto toy_r = checks::denoiser_suite(toy().corpus, toy().vocab, 200, 3, 1e-12);
  return {failures == 0 && toy_r.passed(), std::to_string(cases) + " random corpora: max error " +
                                               fmt("%.2e", worst) + "; toy corpus 200 cases: max error " +
                                               fmt("%.2e", toy_r.worst)};
}

Outcome unconstrained() {
  // 4 ordinary tokens at L = 3: 64 sequences.
  const Vocabulary vocab({"a", "b", "c", "d", "[M]"}, 4);
  const Corpus corpus({{Sequence({0, 1, 2}), 4.0},
                       {Sequence({0, 0, 1}), 2.0},
                       {Sequence({2, 1, 0}), 1.0},
                       {Sequence({3, 3, 1}), 2.0},
                       {Sequence({2, 2, 0}), 1.0},
                       {Sequence({1, 3, 0}), 3.0}});
  std::vector<std::pair<Sequence, double>> want;
  for (const auto& e : corpus.entries()) want.emplace_back(e.seq, e.weight);
  Outcome o{true, "1e5 samples, TV:"};
  for (auto kind : {KernelKind::kMasked, KernelKind::kUniform}) {
    SampleConfig cfg;
    cfg.kernel = kind;
    cfg.length = 3;
    cfg.steps = 32;
    cfg.num_samples = 100'000;
    cfg.seed = 5;
    cfg.threads = threads();
    std::map<Sequence, double> freq;
    for (const auto& s : sample_unconstrained(corpus, vocab, cfg)) freq[s] += 1.0 / 100'000.0;
    const double tv = oracle::total_variation({freq.begin(), freq.end()}, want);
    o.pass = o.pass && tv <= 0.05;
    o.detail += " " + std::string(to_string(kind)) + "=" + fmt("%.4f", tv);
  }
  return o;
}

Outcome kl_projection() {
  const auto p = checks::projection_suite(50, 17, 3, 4, 1e-2);
  const auto q = checks::position_suite(200, 17, 4, 1e-3, 1e-3);
  return {p.passed() && q.passed(), "alm: 50 instances, worst excess " + fmt("%.2e", p.worst) +
                                        " nats; position: 200 rows, worst gap " + fmt("%.2e", q.worst)};
}

// |fd - analytic| <= 1e-4 * max(1, |analytic|).
double rel_err(double fd, double an) { return std::abs(fd - an) / std::max(1.0, std::abs(an)); }

Outcome gradients() {
  const std::size_t len = 4, n = 5;
  std::vector<double> w(n);
  for (std::size_t v = 0; v < n; ++v) w[v] = 0.15 * static_cast<double>(v) - 0.1;
  const std::vector<ConstraintSet::Ptr> all{std::make_shared<LinearScore>(w, 0.05, "linear"),
                                            std::make_shared<TokenCount>(1, CountOp::kLe, 0.5, 0.0, "le"),
                                            std::make_shared<TokenCount>(2, CountOp::kGe, 2.5, 0.0, "ge"),
                                            std::make_shared<TokenCount>(0, CountOp::kEq, 1.5, 0.0, "eq"),
                                            std::make_shared<Forbidden>(3, "forbidden"),
                                            std::make_shared<Position>(2, 4, 0.0, "position")};
  const ConstraintSet cs(all);
  Rng rng(23);
  const double h = 1e-6;
  double worst_score = 0.0, worst_alm = 0.0;
  for (int point = 0; point < 100; ++point) {
    const SeqDist phi = checks::random_dist(len, n, rng);
    // Relaxed scores: directional differences along e_a - e_b inside a row.
    for (const auto& c : all) {
      const Matrix g = c->relaxed_grad(phi);
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t a = 0; a < n; ++a) {
          for (std::size_t b = 0; b < n; ++b) {
            if (a == b) continue;
            std::vector<double> up(phi.row(i).begin(), phi.row(i).end()), dn = up;
            up[a] += h;
            up[b] -= h;
            dn[a] -= h;
            dn[b] += h;
            const double fd = (c->relaxed_score(phi.with_row(i, up)) - c->relaxed_score(phi.with_row(i, dn))) / (2 * h);
            worst_score = std::max(worst_score, rel_err(fd, g(i, a) - g(i, b)));
          }
        }
      }
    }
    // ALM objective in logit coordinates, with nonzero multipliers so every
    // penalty term is active somewhere.
    RelaxConfig relax;
    relax.stochastic = point % 2 == 1;
    relax.seed = static_cast<std::uint64_t>(point);
    Multipliers m;
    for (std::size_t k = 0; k < cs.size(); ++k) {
      m.lambda.push_back(0.2 + 0.3 * static_cast<double>(k));
      m.mu.push_back(1.0 + static_cast<double>(k));
      m.margin.push_back(0.0);
    }
    const SeqDist x_in = checks::random_dist(len, n, rng);
    const AlmObjective obj(x_in, cs, relax, m);
    Matrix z = AlmObjective::logits_of(phi);
    const Matrix g = obj.gradient(z);
    for (std::size_t k = 0; k < z.values.size(); ++k) {
      const double keep = z.values[k];
      z.values[k] = keep + h;
      const double up = obj.value(z);
      z.values[k] = keep - h;
      const double dn = obj.value(z);
      z.values[k] = keep;
      worst_alm = std::max(worst_alm, rel_err((up - dn) / (2 * h), g.values[k]));
    }
  }
  return {worst_score <= 1e-4 && worst_alm <= 1e-4, "100 points, worst relative error: scores " +
                                                        fmt("%.2e", worst_score) + ", ALM objective " +
                                                        fmt("%.2e", worst_alm)};
}

Outcome forward_frequencies() {
  const int draws = 100'000;
  int cells = 0, outside = 0;
  double worst = 0.0;
  Rng rng(2026);
  for (const NoiseKernel& k : {NoiseKernel::masked(6, 5), NoiseKernel::uniform(5)}) {
    const Sequence x0({0, 3, 1, 4});
    for (double a : {0.3, 0.7}) {
      const SeqDist p = forward_marginal(k, x0, a);
      const std::size_t n = k.vocab_size();
      std::vector<int> counts(x0.size() * n, 0);
      for (int d = 0; d < draws; ++d) {
        const Sequence s = forward_sample(k, x0, a, rng);
        for (std::size_t i = 0; i < x0.size(); ++i) ++counts[i * n + s[i]];
      }
      for (std::size_t i = 0; i < x0.size(); ++i) {
        for (TokenId v = 0; v < n; ++v) {
          const double q = p(i, v);
          const double sd = std::sqrt(draws * q * (1.0 - q));
          const double dev = std::abs(counts[i * n + v] - draws * q);
          ++cells;
          if (sd == 0.0) {
            outside += dev > 0.0 ? 1 : 0;
            continue;
          }
          worst = std::max(worst, dev / sd);
          outside += dev > 3.0 * sd ? 1 : 0;
        }
      }
    }
  }
  return {outside == 0, std::to_string(cells) + " cells, " + std::to_string(outside) + " outside 3 sd, worst " +
                            fmt("%.2f", worst) + " sd"};
}

Outcome contraction() {
  const ConstraintSet cs = load_constraint_spec(kToy / "constraints" / "toxicity_025.json", toy().vocab);
  SampleConfig cfg = toy_config(100);
  cfg.project_every = 1;
  cfg.trace = true;
  const SampleRun run = sample_constrained(toy().corpus, toy().vocab, cs, cfg);
  std::vector<std::vector<double>> by_step(static_cast<std::size_t>(cfg.steps) + 1);
  for (const auto& r : run.trace) by_step[static_cast<std::size_t>(r.step)].push_back(r.violation_before);
  std::vector<double> median;
  double peak_mean = 0.0;
  int first = -1;
  for (int k = 1; k <= cfg.steps; ++k) {
    auto& v = by_step[static_cast<std::size_t>(k)];
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    median.push_back(m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]));
    double mean = 0.0;
    for (double x : v) mean += x / static_cast<double>(m);
    peak_mean = std::max(peak_mean, mean);
    if (first < 0) {
      for (const auto& r : run.trace) {
        if (r.step == k && r.projected) first = k;
      }
    }
  }
  int pairs = 0, ok = 0;
  for (std::size_t k = static_cast<std::size_t>(first); k < median.size(); ++k) {
    ++pairs;
    ok += median[k] <= median[k - 1] ? 1 : 0;
  }
  const double frac = pairs ? static_cast<double>(ok) / pairs : 0.0;
  return {first > 0 && pairs > 0 && frac >= 0.9, "100 runs, first projection at step " + std::to_string(first) +
                                                     ", non-increasing median in " + std::to_string(ok) + "/" +
                                                     std::to_string(pairs) + " pairs (peak median " +
                                                     fmt("%g", *std::max_element(median.begin(), median.end())) +
                                                     ", peak mean " + fmt("%.3g", peak_mean) + ")"};
}

Outcome ablation() {
  cli::RunConfig cfg = cli::load_run_config(kToy / "configs" / "ablation.json");
  cfg.output_dir = fs::temp_directory_path() / ("cdiff_acceptance_" + std::to_string(std::random_device{}()));
  cfg.sample.threads = threads();
  std::ostringstream out, err;
  const int code = cli::cmd_ablate(cfg, out, err);
  std::ifstream csv(cfg.output_dir / "ablation.csv");
  std::string line;
  std::getline(csv, line);
  int cells = 0, clean = 0;
  while (std::getline(csv, line)) {
    ++cells;
    // status is column 6, violation_rate column 7.
    std::stringstream ss(line);
    std::vector<std::string> col;
    for (std::string f; std::getline(ss, f, ',');) col.push_back(f);
    if (col.size() > 6 && col[5] == "ok" && std::stod(col[6]) == 0.0) ++clean;
  }
  std::error_code ec;
  fs::remove_all(cfg.output_dir, ec);
  return {code == cli::kExitOk && cells == 27 && clean == 27,
          std::to_string(clean) + "/" + std::to_string(cells) + " cells with violation rate 0 (" +
              std::to_string(cfg.sample.num_samples) + " samples each)"};
}

Outcome entropy_metric() {
  double worst = 0.0;
  for (TokenId k = 1; k <= 16; ++k) {
    std::vector<TokenId> ids(k);
    for (TokenId i = 0; i < k; ++i) ids[i] = i;
    worst = std::max(worst, std::abs(entropy(Sequence(ids)) - std::log(static_cast<double>(k))));
  }
  const double same = entropy(Sequence({4, 4, 4, 4, 4, 4}));
  return {worst <= 1e-12 && same == 0.0, "uniform K = 1..16 worst error " + fmt("%.1e", worst) +
                                             ", all-same " + fmt("%g", same)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"zero-violation guarantee", zero_violation},
      {"novelty projection", novelty},
      {"denoiser exactness", denoiser},
      {"unconstrained correctness", unconstrained},
      {"KL-projection near-optimality", kl_projection},
      {"gradient fidelity", gradients},
      {"forward-process statistics", forward_frequencies},
      {"contraction diagnostic", contraction},
      {"ablation robustness", ablation},
      {"entropy correctness", entropy_metric},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %-30s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
