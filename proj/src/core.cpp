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

#include "cdiff/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace cdiff {

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::optional<TokenId> mask_id)
    : tokens_(std::move(tokens)), mask_id_(mask_id) {
  if (tokens_.size() < 2) throw std::invalid_argument("vocabulary needs at least two tokens");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw std::invalid_argument("empty token string");
    auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
    if (!inserted) throw std::invalid_argument("duplicate token '" + tokens_[i] + "'");
  }
  if (mask_id_ && *mask_id_ >= tokens_.size()) throw std::invalid_argument("mask id out of range");
}

TokenId Vocabulary::id(std::string_view token) const {
  auto found = find(token);
  if (!found) throw std::out_of_range("unknown token '" + std::string(token) + "'");
  return *found;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Sequence::Sequence(std::vector<TokenId> ids) : ids_(std::move(ids)) {
  if (ids_.empty()) throw std::invalid_argument("sequence must have length >= 1");
}

void Sequence::check_range(std::size_t vocab_size) const {
  for (TokenId id : ids_) {
    if (id >= vocab_size) throw std::invalid_argument("token id " + std::to_string(id) + " out of range");
  }
}

std::size_t SequenceHash::operator()(const Sequence& s) const noexcept {
  // FNV-1a over the ids.
  std::uint64_t h = 1469598103934665603ull;
  for (TokenId id : s.ids()) {
    h ^= id;
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

namespace {

void check_rows(std::size_t length, std::size_t n, const std::vector<double>& p) {
  if (length == 0 || n == 0) throw std::invalid_argument("SeqDist needs L >= 1 and N >= 1");
  if (p.size() != length * n) throw std::invalid_argument("SeqDist size mismatch");
  for (std::size_t i = 0; i < length; ++i) {
    double sum = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      double x = p[i * n + v];
      if (!(x >= 0.0) || !std::isfinite(x)) {
        throw std::invalid_argument("SeqDist row " + std::to_string(i) + " has a negative or non-finite entry");
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > SeqDist::kRowTolerance) {
      throw std::invalid_argument("SeqDist row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
  }
}

}  // namespace

SeqDist::SeqDist(std::size_t length, std::size_t vocab_size, std::vector<double> probs)
    : length_(length), vocab_size_(vocab_size), probs_(std::move(probs)) {
  check_rows(length_, vocab_size_, probs_);
}

SeqDist::SeqDist(const Matrix& m) : SeqDist(m.rows, m.cols, m.values) {}

SeqDist SeqDist::one_hot(const Sequence& seq, std::size_t vocab_size) {
  seq.check_range(vocab_size);
  std::vector<double> p(seq.size() * vocab_size, 0.0);
  for (std::size_t i = 0; i < seq.size(); ++i) p[i * vocab_size + seq[i]] = 1.0;
  return SeqDist(seq.size(), vocab_size, std::move(p));
}

SeqDist SeqDist::uniform(std::size_t length, std::size_t vocab_size) {
  return SeqDist(length, vocab_size, std::vector<double>(length * vocab_size, 1.0 / static_cast<double>(vocab_size)));
}

SeqDist SeqDist::normalized(std::size_t length, std::size_t vocab_size, std::vector<double> weights) {
  if (weights.size() != length * vocab_size) throw std::invalid_argument("SeqDist size mismatch");
  for (std::size_t i = 0; i < length; ++i) {
    double sum = 0.0;
    for (std::size_t v = 0; v < vocab_size; ++v) {
      if (weights[i * vocab_size + v] < 0.0) throw std::invalid_argument("negative weight");
      sum += weights[i * vocab_size + v];
    }
    if (!(sum > 0.0)) throw std::invalid_argument("row with zero mass");
    for (std::size_t v = 0; v < vocab_size; ++v) weights[i * vocab_size + v] /= sum;
  }
  return SeqDist(length, vocab_size, std::move(weights));
}

SeqDist SeqDist::with_row(std::size_t i, std::span<const double> row) const {
  if (i >= length_ || row.size() != vocab_size_) throw std::invalid_argument("with_row: bad index or width");
  std::vector<double> p = probs_;
  std::copy(row.begin(), row.end(), p.begin() + static_cast<std::ptrdiff_t>(i * vocab_size_));
  return SeqDist(length_, vocab_size_, std::move(p));
}

Schedule::Schedule(ScheduleKind kind, int steps) : kind_(kind), steps_(steps) {
  if (steps < 1) throw std::invalid_argument("schedule needs T >= 1");
}

Corpus::Corpus(std::vector<Entry> entries) {
  if (entries.empty()) throw std::invalid_argument("corpus is empty");
  length_ = entries.front().seq.size();
  std::map<Sequence, double> merged;
  std::vector<Sequence> order;
  for (auto& e : entries) {
    if (e.seq.size() != length_) throw std::invalid_argument("corpus sequences must share one length");
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) throw std::invalid_argument("corpus weights must be positive");
    auto [it, inserted] = merged.emplace(e.seq, 0.0);
    if (inserted) order.push_back(e.seq);
    it->second += e.weight;
  }
  double total = 0.0;
  for (const auto& [seq, w] : merged) total += w;
  entries_.reserve(order.size());
  for (auto& seq : order) {
    double w = merged[seq] / total;
    entries_.push_back({std::move(seq), w});
  }
}

std::vector<Sequence> Corpus::sequences() const {
  std::vector<Sequence> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.seq);
  return out;
}

TokenId argmax(std::span<const double> row) {
  TokenId best = 0;
  for (std::size_t v = 1; v < row.size(); ++v) {
    if (row[v] > row[best]) best = static_cast<TokenId>(v);
  }
  return best;
}

Sequence decode(const SeqDist& d) {
  std::vector<TokenId> ids(d.length());
  for (std::size_t i = 0; i < d.length(); ++i) ids[i] = argmax(d.row(i));
  return Sequence(std::move(ids));
}

double alpha(const Schedule& sched, int t) {
  const int T = sched.steps();
  if (t < 0 || t > T) throw std::out_of_range("schedule step " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
  const double frac = static_cast<double>(t) / static_cast<double>(T);
  switch (sched.kind()) {
    case ScheduleKind::kLinear:
      return 1.0 - frac;
    case ScheduleKind::kLogLinear:
      // exp(log(1e-4)) rounds to just above 1e-4; pin the endpoint.
      return t == T ? Schedule::kLogLinearFloor : std::exp(frac * std::log(Schedule::kLogLinearFloor));
  }
  return 0.0;
}

double kl_row(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_row: width mismatch");
  double kl = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (p[v] <= 0.0) continue;
    if (q[v] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[v] * std::log(p[v] / q[v]);
  }
  return kl;
}

double kl_divergence(const SeqDist& p, const SeqDist& q) {
  if (p.length() != q.length() || p.vocab_size() != q.vocab_size()) {
    throw std::invalid_argument("kl_divergence: shape mismatch");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.length(); ++i) kl += kl_row(p.row(i), q.row(i));
  // Rounding can leave tiny negatives when p and q agree.
  return std::max(kl, 0.0);
}

std::string_view to_string(ScheduleKind k) {
  return k == ScheduleKind::kLinear ? "linear" : "loglinear";
}

ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "linear") return ScheduleKind::kLinear;
  if (s == "loglinear") return ScheduleKind::kLogLinear;
  throw std::invalid_argument("unknown schedule kind '" + std::string(s) + "'");
}

}  // namespace cdiff
