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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cdiff {

using TokenId = std::uint32_t;

/// Ordered token inventory. Index of a token string is its id.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, std::optional<TokenId> mask_id = std::nullopt);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::optional<TokenId> mask_id() const { return mask_id_; }

  /// Throws std::out_of_range for unknown tokens.
  TokenId id(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::optional<TokenId> mask_id_;
};

/// A fixed-length token sequence.
class Sequence {
 public:
  Sequence() = default;
  explicit Sequence(std::vector<TokenId> ids);

  std::size_t size() const { return ids_.size(); }
  TokenId operator[](std::size_t i) const { return ids_[i]; }
  const std::vector<TokenId>& ids() const { return ids_; }

  /// Throws std::invalid_argument if any id is >= vocab_size.
  void check_range(std::size_t vocab_size) const;

  friend auto operator<=>(const Sequence&, const Sequence&) = default;
  friend bool operator==(const Sequence&, const Sequence&) = default;

 private:
  std::vector<TokenId> ids_;
};

struct SequenceHash {
  std::size_t operator()(const Sequence& s) const noexcept;
};

/// Dense row-major rows x cols array of reals with no simplex invariant.
/// Used for gradients, logits and scratch buffers.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

/// L x N per-position categorical distributions. Every row lies on the
/// probability simplex (non-negative, sums to 1 within kRowTolerance).
class SeqDist {
 public:
  static constexpr double kRowTolerance = 1e-9;

  /// Validates every row; throws std::invalid_argument on violation.
  SeqDist(std::size_t length, std::size_t vocab_size, std::vector<double> probs);
  explicit SeqDist(const Matrix& m);

  static SeqDist one_hot(const Sequence& seq, std::size_t vocab_size);
  static SeqDist uniform(std::size_t length, std::size_t vocab_size);
  /// Divides each row by its sum. Rows must be non-negative with positive sum.
  static SeqDist normalized(std::size_t length, std::size_t vocab_size, std::vector<double> weights);

  std::size_t length() const { return length_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::span<const double> row(std::size_t i) const { return {probs_.data() + i * vocab_size_, vocab_size_}; }
  double operator()(std::size_t i, TokenId v) const { return probs_[i * vocab_size_ + v]; }
  const std::vector<double>& values() const { return probs_; }

  /// Returns a copy with row i replaced. The new row is validated.
  SeqDist with_row(std::size_t i, std::span<const double> row) const;

 private:
  std::size_t length_;
  std::size_t vocab_size_;
  std::vector<double> probs_;
};

enum class ScheduleKind { kLinear, kLogLinear };

/// Discrete noise schedule alpha(t) over t = 0..T.
class Schedule {
 public:
  /// Terminal value of the log-linear schedule.
  static constexpr double kLogLinearFloor = 1e-4;

  Schedule(ScheduleKind kind, int steps);

  ScheduleKind kind() const { return kind_; }
  int steps() const { return steps_; }

 private:
  ScheduleKind kind_;
  int steps_;
};

/// Weighted set of equal-length clean sequences. Duplicates are merged and
/// weights normalized to sum to one.
class Corpus {
 public:
  struct Entry {
    Sequence seq;
    double weight;
  };

  explicit Corpus(std::vector<Entry> entries);

  std::size_t size() const { return entries_.size(); }
  std::size_t length() const { return length_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Sequence> sequences() const;

 private:
  std::vector<Entry> entries_;
  std::size_t length_ = 0;
};

/// Per-position argmax. Ties go to the lowest token index.
Sequence decode(const SeqDist& d);
TokenId argmax(std::span<const double> row);

/// Signal level alpha(t). Throws std::out_of_range unless 0 <= t <= T.
double alpha(const Schedule& sched, int t);

/// Sum over positions of KL(p_i || q_i) in nats. Returns +inf when q has a
/// zero where p is positive. Throws std::invalid_argument on shape mismatch.
double kl_divergence(const SeqDist& p, const SeqDist& q);
double kl_row(std::span<const double> p, std::span<const double> q);

std::string_view to_string(ScheduleKind k);
ScheduleKind parse_schedule_kind(std::string_view s);

}  // namespace cdiff
