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

#pragma once

#include <cstddef>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "cdiff/constraint.hpp"
#include "cdiff/core.hpp"
#include "cdiff/relax.hpp"

namespace cdiff {

/// Margin used whenever a row is rebuilt so that one token strictly wins.
inline constexpr double kArgmaxMargin = 1e-6;

struct AlmConfig {
  /// One entry per constraint, or a single entry broadcast to all.
  std::vector<double> lambda_init{0.0};
  double mu_init = 1.0;
  double mu_max = 1000.0;
  double alpha_scale = 2.0;
  double eta = 0.2;
  double delta = 0.0;
  int max_inner_iter = 10;
  int max_outer_iter = 1000;
  RelaxConfig relax;
  /// After the multiplier loop, fix the decoded target, undo flips that are
  /// not needed for feasibility, and return the exact row-wise KL projection
  /// onto that target.
  bool polish = true;
  /// kFixed: z -= eta * grad. kBacktracking: halve the step from eta until
  /// the objective decreases. kAdaptive: per-coordinate steps scaled by a
  /// running RMS of past gradients.
  enum class Step { kFixed, kBacktracking, kAdaptive };
  Step step_rule = Step::kAdaptive;
  /// Tokens whose logits are never updated (e.g. MASK).
  std::vector<TokenId> frozen_tokens;
  /// Keep the multipliers after every outer iteration in AlmResult::history.
  bool record_history = false;

  void validate() const;
};

struct Multipliers {
  std::vector<double> lambda;
  std::vector<double> mu;
  /// Per-constraint tightening of the relaxed threshold (tau - margin). It
  /// grows when the relaxed constraint holds but the decoded one does not.
  std::vector<double> margin;
};

struct AlmResult {
  SeqDist projected;
  bool feasible = false;
  int outer_iters = 0;
  std::vector<double> final_violation;
  double kl_moved = 0.0;
  Multipliers multipliers;
  std::vector<Multipliers> history;
};

/// The inner objective in per-row logit coordinates z (y = softmax(z)):
/// KL(x_in || y) + sum_i lambda_i dg_i(phi(y)) + mu_i / 2 dg_i(phi(y))^2,
/// where dg_i = max(0, relaxed_score_i - tau_i + margin_i) and phi is the
/// relaxation.
class AlmObjective {
 public:
  AlmObjective(const SeqDist& x_in, const ConstraintSet& cs, const RelaxConfig& relax, Multipliers m);

  static Matrix logits_of(const SeqDist& d);
  static SeqDist softmax_rows(const Matrix& z);

  double value(const Matrix& z) const;
  /// Relaxed violations dg_i at z.
  std::vector<double> relaxed_violation(const Matrix& z) const;
  Matrix gradient(const Matrix& z) const;

  const Multipliers& multipliers() const { return m_; }
  Multipliers& multipliers() { return m_; }

 private:
  SeqDist relaxed(const Matrix& z) const;

  const SeqDist& x_in_;
  const ConstraintSet& cs_;
  RelaxConfig relax_;
  Matrix noise_;
  Multipliers m_;
};

/// Augmented-Lagrangian KL projection of x_in onto the sequences whose
/// decoded tokens satisfy every hard constraint. Two-sided constraints are
/// handled through their one-sided parts, so Multipliers has one entry per
/// part. `warm` seeds the multipliers instead of cfg's initial values.
AlmResult alm_project(const SeqDist& x_in, const ConstraintSet& cs, const AlmConfig& cfg,
                      const Multipliers* warm = nullptr);

/// Exact KL projection of one row onto {argmax = v}: the smallest set of
/// leading competitors is levelled with v, which then wins by kArgmaxMargin.
/// Returns the row unchanged when v already decodes.
std::vector<double> project_row_argmax(std::span<const double> row, TokenId v);

/// Replaces row p by project_row_argmax(row p, v).
SeqDist position_project(const SeqDist& x_in, std::size_t p, TokenId v);

class NoveltyDb {
 public:
  NoveltyDb() = default;
  explicit NoveltyDb(const std::vector<Sequence>& seqs);

  bool contains(const Sequence& s) const { return set_.contains(s); }
  /// Returns false if already present.
  bool insert(const Sequence& s) { return set_.insert(s).second; }
  std::size_t size() const { return set_.size(); }

 private:
  std::unordered_set<Sequence, SequenceHash> set_;
};

struct NoveltyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoveltyResult {
  SeqDist projected;
  Sequence selected;
  double cost = 0.0;
};

/// Flip cost of forcing token v at a row: row max minus row[v].
double flip_cost(std::span<const double> row, TokenId v);

/// Best-first search for the db-absent sequence of least total flip cost
/// (ties: lexicographically smallest). Excluded tokens are only kept where
/// they are already the row's argmax. Throws NoveltyError when every
/// sequence is in db or the expansion budget runs out.
NoveltyResult novelty_project(const SeqDist& x_in, NoveltyDb& db, bool insert = true,
                              const std::vector<TokenId>& excluded = {}, std::size_t max_expansions = 10'000'000);

}  // namespace cdiff
