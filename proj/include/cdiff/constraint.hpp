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

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "cdiff/core.hpp"

namespace cdiff {

/// A sequence-level requirement score(x) <= tau. The relaxed score is a
/// differentiable function of per-position token probabilities and agrees
/// with hard_score on one-hot inputs.
class Constraint {
 public:
  Constraint(std::string name, double tau);
  virtual ~Constraint() = default;

  const std::string& name() const { return name_; }
  double tau() const { return tau_; }

  virtual std::string_view type() const = 0;
  virtual double relaxed_score(const SeqDist& phi) const = 0;
  /// d relaxed_score / d phi, an L x N matrix. Subgradient at kinks.
  virtual Matrix relaxed_grad(const SeqDist& phi) const = 0;
  virtual double hard_score(const Sequence& seq) const = 0;

  /// One-sided parts whose largest violation equals this constraint's
  /// violation. Empty when the constraint is already one-sided.
  virtual std::vector<std::shared_ptr<const Constraint>> one_sided() const { return {}; }

 private:
  std::string name_;
  double tau_;
};

/// Mean per-position token weight: (1/L) sum_i sum_v w(v) phi_i(v).
class LinearScore : public Constraint {
 public:
  LinearScore(std::vector<double> weights, double tau, std::string name = "linear_score");

  std::string_view type() const override { return "linear_score"; }
  double relaxed_score(const SeqDist& phi) const override;
  Matrix relaxed_grad(const SeqDist& phi) const override;
  double hard_score(const Sequence& seq) const override;

  const std::vector<double>& weights() const { return weights_; }

 private:
  void check_width(std::size_t n) const;
  std::vector<double> weights_;
};

enum class CountOp { kLe, kGe, kEq };

std::string_view to_string(CountOp op);
CountOp parse_count_op(std::string_view s);

/// Occurrences of one token, compared against k. The score is written in
/// <=-form: count - k, k - count or |count - k| for le, ge, eq.
class TokenCount : public Constraint {
 public:
  TokenCount(TokenId token, CountOp op, double k, double tau, std::string name = {});

  std::string_view type() const override { return "token_count"; }
  double relaxed_score(const SeqDist& phi) const override;
  Matrix relaxed_grad(const SeqDist& phi) const override;
  double hard_score(const Sequence& seq) const override;
  /// eq splits into le and ge with the same bound and tau.
  std::vector<std::shared_ptr<const Constraint>> one_sided() const override;

  TokenId token() const { return token_; }
  CountOp op() const { return op_; }
  double bound() const { return k_; }

 private:
  double oriented(double count) const;
  TokenId token_;
  CountOp op_;
  double k_;
};

/// Token must never appear (count <= 0).
class Forbidden final : public TokenCount {
 public:
  explicit Forbidden(TokenId token, std::string name = {});
  std::string_view type() const override { return "forbidden"; }
};

/// Position p must decode to token v. The score is the margin
/// max_{u != v} phi_p(u) - phi_p(v) + kStrictMargin, so a tie between v and
/// another token still counts as a violation.
class Position final : public Constraint {
 public:
  static constexpr double kStrictMargin = 1e-6;

  Position(std::size_t position, TokenId token, double tau = 0.0, std::string name = {});

  std::string_view type() const override { return "position"; }
  double relaxed_score(const SeqDist& phi) const override;
  Matrix relaxed_grad(const SeqDist& phi) const override;
  double hard_score(const Sequence& seq) const override;

  std::size_t position() const { return position_; }
  TokenId token() const { return token_; }

 private:
  std::size_t position_;
  TokenId token_;
};

class ConstraintSet {
 public:
  using Ptr = std::shared_ptr<const Constraint>;

  /// Throws std::invalid_argument when empty or when names repeat.
  explicit ConstraintSet(std::vector<Ptr> constraints);

  std::size_t size() const { return constraints_.size(); }
  const Constraint& operator[](std::size_t i) const { return *constraints_[i]; }
  auto begin() const { return constraints_.begin(); }
  auto end() const { return constraints_.end(); }

 private:
  std::vector<Ptr> constraints_;
};

/// max(0, relaxed_score(phi) - tau).
double violation(const Constraint& c, const SeqDist& phi);

/// Per-constraint max(0, hard_score(seq) - tau).
std::vector<double> hard_violation(const ConstraintSet& cs, const Sequence& seq);
double max_hard_violation(const ConstraintSet& cs, const Sequence& seq);

/// Parses a JSON array of constraint objects. Relative weights_file paths
/// resolve against base_dir. Throws ParseError on any malformed entry.
ConstraintSet parse_constraint_spec(std::string_view json_text, const Vocabulary& vocab,
                                    const std::filesystem::path& base_dir = {});
ConstraintSet load_constraint_spec(const std::filesystem::path& path, const Vocabulary& vocab);

/// Weights file: one `token<TAB>weight` per line; unlisted tokens weigh 0.
std::vector<double> load_token_weights(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace cdiff
