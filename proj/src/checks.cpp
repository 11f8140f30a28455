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

#include "cdiff/checks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>
#include <unordered_set>

#include "cdiff/denoiser.hpp"
#include "cdiff/oracle.hpp"
#include "cdiff/projection.hpp"

namespace cdiff::checks {

namespace {

std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::size_t space_size(std::size_t length, std::size_t vocab_size) {
  std::size_t s = 1;
  for (std::size_t i = 0; i < length; ++i) s *= vocab_size;
  return s;
}

bool any_feasible(const ConstraintSet& cs, std::size_t length, std::size_t n) {
  bool found = false;
  oracle::for_each_sequence(length, n, [&](const Sequence& s) {
    if (!found && max_hard_violation(cs, s) <= 0.0) found = true;
  });
  return found;
}

void note(SuiteResult& r, const std::string& msg) {
  if (r.detail.empty()) r.detail = msg;
}

std::string sci(double x) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << x;
  return os.str();
}

}  // namespace

SeqDist random_dist(std::size_t length, std::size_t vocab_size, Rng& rng, double concentration) {
  std::gamma_distribution<double> g(concentration, 1.0);
  std::vector<double> w(length * vocab_size);
  for (std::size_t i = 0; i < length; ++i) {
    double sum = 0.0;
    do {
      sum = 0.0;
      for (std::size_t v = 0; v < vocab_size; ++v) sum += w[i * vocab_size + v] = g(rng);
    } while (!(sum > 0.0));
  }
  return SeqDist::normalized(length, vocab_size, std::move(w));
}

ConstraintSet random_single_constraint(std::size_t length, std::size_t n, Rng& rng) {
  while (true) {
    std::vector<ConstraintSet::Ptr> c;
    switch (uniform_int(rng, 0, 5)) {
      case 0: {
        std::vector<double> w(n);
        for (double& x : w) x = uniform_real(rng, 0.0, 1.0);
        const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
        c.push_back(std::make_shared<LinearScore>(w, uniform_real(rng, *lo, *hi)));
        break;
      }
      case 1:
      case 2:
      case 3: {
        const CountOp op = std::array{CountOp::kLe, CountOp::kGe, CountOp::kEq}[uniform_int(rng, 0, 2)];
        c.push_back(std::make_shared<TokenCount>(static_cast<TokenId>(uniform_int(rng, 0, n - 1)), op,
                                                 static_cast<double>(uniform_int(rng, 0, length)), 0.0));
        break;
      }
      case 4:
        c.push_back(std::make_shared<Forbidden>(static_cast<TokenId>(uniform_int(rng, 0, n - 1))));
        break;
      default:
        c.push_back(std::make_shared<Position>(uniform_int(rng, 0, length - 1),
                                               static_cast<TokenId>(uniform_int(rng, 0, n - 1))));
        break;
    }
    ConstraintSet cs(std::move(c));
    if (any_feasible(cs, length, n)) return cs;
  }
}

SuiteResult denoiser_suite(const Corpus& corpus, const Vocabulary& vocab, int cases, std::uint64_t seed,
                           double tolerance, const PosteriorFn& posterior) {
  SuiteResult r{"denoiser", 0, 0, 0.0, {}};
  Rng rng(seed);
  std::vector<double> weights;
  for (const auto& e : corpus.entries()) weights.push_back(e.weight);
  for (int c = 0; c < cases; ++c) {
    const bool masked = vocab.mask_id() && c % 2 == 0;
    const NoiseKernel kernel = NoiseKernel::for_vocabulary(masked ? KernelKind::kMasked : KernelKind::kUniform, vocab);
    const Sequence& x0 = corpus.entries()[sample_categorical(weights, rng)].seq;
    const double a_t = uniform_real(rng, 0.0, 1.0);
    const Sequence xt = forward_sample(kernel, x0, a_t, rng);
    const auto got = posterior ? posterior(corpus, kernel, xt, a_t) : exact_posterior(corpus, kernel, xt, a_t);
    const auto want = oracle::enumerate_posterior(corpus, kernel.reference(), xt, a_t);
    ++r.cases;
    if (!got || !want) {
      if (got.has_value() != want.has_value()) {
        ++r.failures;
        note(r, "support disagreement at case " + std::to_string(c));
      }
      continue;
    }
    double err = 0.0;
    for (std::size_t k = 0; k < got->values().size(); ++k) {
      err = std::max(err, std::abs(got->values()[k] - want->values()[k]));
    }
    r.worst = std::max(r.worst, err);
    if (err > tolerance) {
      ++r.failures;
      note(r, "case " + std::to_string(c) + " max abs error " + sci(err));
    }
  }
  return r;
}

SuiteResult projection_suite(int cases, std::uint64_t seed, std::size_t max_length, std::size_t max_vocab,
                             double tolerance) {
  SuiteResult r{"projection", 0, 0, 0.0, {}};
  Rng rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t len = uniform_int(rng, 1, max_length);
    const std::size_t n = uniform_int(rng, 2, max_vocab);
    const SeqDist x = random_dist(len, n, rng);
    const ConstraintSet cs = random_single_constraint(len, n, rng);
    const auto opt = oracle::enumerate_constrained_kl(
        x, [&](const Sequence& s) { return max_hard_violation(cs, s) <= 0.0; });
    const AlmResult res = alm_project(x, cs, AlmConfig{});
    ++r.cases;
    const double gap = res.kl_moved - *opt;
    r.worst = std::max(r.worst, gap);
    if (!res.feasible || gap > tolerance) {
      ++r.failures;
      std::ostringstream os;
      os << "case " << c << " (" << cs[0].name() << ", L=" << len << ", N=" << n << "): feasible=" << res.feasible
         << " kl " << res.kl_moved << " vs optimum " << *opt;
      note(r, os.str());
    }
  }
  return r;
}

SuiteResult position_suite(int cases, std::uint64_t seed, std::size_t max_vocab, double resolution,
                           double tolerance) {
  SuiteResult r{"position", 0, 0, 0.0, {}};
  Rng rng(seed);
  for (int c = 0; c < cases; ++c) {
    const std::size_t n = uniform_int(rng, 2, max_vocab);
    const SeqDist x = random_dist(1, n, rng);
    const auto v = static_cast<TokenId>(uniform_int(rng, 0, n - 1));
    const SeqDist got = position_project(x, 0, v);
    const auto want = oracle::grid_kl_project(x.row(0), v, resolution);
    const double diff = std::abs(kl_row(x.row(0), got.row(0)) - want.kl);
    ++r.cases;
    r.worst = std::max(r.worst, diff);
    if (decode(got)[0] != v || diff > tolerance) {
      ++r.failures;
      note(r, "case " + std::to_string(c) + " kl difference " + sci(diff));
    }
  }
  return r;
}

SuiteResult novelty_suite(int cases, std::uint64_t seed, std::size_t max_space) {
  SuiteResult r{"novelty", 0, 0, 0.0, {}};
  Rng rng(seed);
  for (int c = 0; c < cases; ++c) {
    std::size_t len = 0, n = 0;
    do {
      len = uniform_int(rng, 1, 4);
      n = uniform_int(rng, 2, 8);
    } while (space_size(len, n) > max_space);
    const SeqDist x = random_dist(len, n, rng);
    const double keep = uniform_real(rng, 0.0, 0.95);
    std::unordered_set<Sequence, SequenceHash> set;
    NoveltyDb db;
    oracle::for_each_sequence(len, n, [&](const Sequence& s) {
      if (uniform_real(rng, 0.0, 1.0) < keep) {
        set.insert(s);
        db.insert(s);
      }
    });
    db.insert(decode(x));
    set.insert(decode(x));
    const auto want = oracle::enumerate_novelty(x, set);
    ++r.cases;
    if (!want) {
      bool threw = false;
      try {
        novelty_project(x, db, false);
      } catch (const NoveltyError&) {
        threw = true;
      }
      if (!threw) {
        ++r.failures;
        note(r, "case " + std::to_string(c) + ": full db did not raise");
      }
      continue;
    }
    const NoveltyResult got = novelty_project(x, db, false);
    r.worst = std::max(r.worst, std::abs(got.cost - want->cost));
    if (got.selected != want->selected || db.contains(got.selected)) {
      ++r.failures;
      note(r, "case " + std::to_string(c) + ": selection differs from enumeration");
    }
  }
  return r;
}

}  // namespace cdiff::checks
