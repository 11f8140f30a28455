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

// Brute-force reference implementations used to check the engine. They only
// depend on the core types and are deliberately naive.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "cdiff/core.hpp"

namespace cdiff::oracle {

/// Calls f on every sequence of V^L in lexicographic order.
void for_each_sequence(std::size_t length, std::size_t vocab_size, const std::function<void(const Sequence&)>& f);

/// Per-position posterior marginals of x_0 given a corrupted sequence, as a
/// plain Bayes sum over corpus entries. `reference` is the corruption target
/// row (one-hot MASK or uniform). Returns nullopt on zero evidence.
std::optional<SeqDist> enumerate_posterior(const Corpus& corpus, std::span<const double> reference,
                                           const Sequence& xt, double a_t);

struct GridResult {
  std::vector<double> point;
  double kl = 0.0;
};

/// min KL(row || y) over the simplex subject to y_v >= y_u for all u, by
/// coarse-to-fine grid search down to `resolution`.
GridResult grid_kl_project(std::span<const double> row, TokenId v, double resolution = 1e-3);

/// Smallest sum of per-row grid projections over every decoded sequence the
/// predicate accepts. Returns nullopt if none is accepted.
std::optional<double> enumerate_constrained_kl(const SeqDist& x_in, const std::function<bool(const Sequence&)>& feasible,
                                               double resolution = 1e-3);

struct NoveltyAnswer {
  Sequence selected;
  double cost = 0.0;
};

/// Cheapest db-absent sequence by full enumeration; ties go to the
/// lexicographically smallest. Costs are summed in position order.
std::optional<NoveltyAnswer> enumerate_novelty(const SeqDist& x_in,
                                               const std::unordered_set<Sequence, SequenceHash>& db);

/// Total variation between two distributions over sequences.
double total_variation(const std::vector<std::pair<Sequence, double>>& p,
                       const std::vector<std::pair<Sequence, double>>& q);

}  // namespace cdiff::oracle
