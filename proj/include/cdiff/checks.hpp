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

// Agreement suites between the engine and the brute-force oracles, shared by
// the `oracle-check` command and the acceptance runner.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "cdiff/constraint.hpp"
#include "cdiff/core.hpp"
#include "cdiff/kernel.hpp"
#include "cdiff/random.hpp"

namespace cdiff::checks {

struct SuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  /// Largest observed error in the suite's own unit.
  double worst = 0.0;
  std::string detail;

  bool passed() const { return cases > 0 && failures == 0; }
};

/// Rows drawn from a symmetric Dirichlet(concentration).
SeqDist random_dist(std::size_t length, std::size_t vocab_size, Rng& rng, double concentration = 1.0);

/// One random LinearScore, TokenCount (le/ge/eq), Forbidden or Position
/// constraint that at least one sequence of V^L satisfies.
ConstraintSet random_single_constraint(std::size_t length, std::size_t vocab_size, Rng& rng);

using PosteriorFn = std::function<std::optional<SeqDist>(const Corpus&, const NoiseKernel&, const Sequence&, double)>;

/// exact_posterior (or `posterior` when given) against the corpus Bayes sum,
/// on forward-corrupted corpus draws at random a_t, alternating kernels.
/// A case fails if any marginal differs by more than `tolerance`.
SuiteResult denoiser_suite(const Corpus& corpus, const Vocabulary& vocab, int cases, std::uint64_t seed,
                           double tolerance = 1e-12, const PosteriorFn& posterior = {});

/// alm_project kl_moved against the enumerated constrained optimum on random
/// single-constraint instances (L <= max_length, N <= max_vocab). Fails a case
/// when the result is infeasible or exceeds the optimum by `tolerance` nats.
SuiteResult projection_suite(int cases, std::uint64_t seed, std::size_t max_length = 3, std::size_t max_vocab = 4,
                             double tolerance = 1e-2);

/// position_project against grid_kl_project on random rows. Fails a case
/// when the KL values differ by more than `tolerance`.
SuiteResult position_suite(int cases, std::uint64_t seed, std::size_t max_vocab = 4, double resolution = 1e-3,
                           double tolerance = 1e-3);

/// novelty_project against enumerate_novelty on random instances with
/// N^L <= max_space and a random db; the selected sequences must be equal.
SuiteResult novelty_suite(int cases, std::uint64_t seed, std::size_t max_space = 4096);

}  // namespace cdiff::checks
