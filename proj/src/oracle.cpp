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

#include "cdiff/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>

namespace cdiff::oracle {

void for_each_sequence(std::size_t length, std::size_t vocab_size, const std::function<void(const Sequence&)>& f) {
  std::vector<TokenId> ids(length, 0);
  while (true) {
    f(Sequence(ids));
    std::size_t i = length;
    while (i > 0) {
      --i;
      if (++ids[i] < vocab_size) break;
      ids[i] = 0;
      if (i == 0) return;
    }
    if (length == 0) return;
  }
}

std::optional<SeqDist> enumerate_posterior(const Corpus& corpus, std::span<const double> reference,
                                           const Sequence& xt, double a_t) {
  const std::size_t len = xt.size();
  const std::size_t n = reference.size();
  std::vector<double> marg(len * n, 0.0);
  double evidence = 0.0;
  for (const auto& e : corpus.entries()) {
    double p = e.weight;
    for (std::size_t i = 0; i < len; ++i) {
      // Forward corruption row a_t * onehot(x0) + (1 - a_t) * reference, read at x_t.
      p *= (e.seq[i] == xt[i] ? a_t : 0.0) + (1.0 - a_t) * reference[xt[i]];
    }
    if (p == 0.0) continue;
    evidence += p;
    for (std::size_t i = 0; i < len; ++i) marg[i * n + e.seq[i]] += p;
  }
  if (evidence == 0.0) return std::nullopt;
  for (double& m : marg) m /= evidence;
  return SeqDist(len, n, std::move(marg));
}

namespace {

double kl_or_inf(std::span<const double> p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] <= 0.0) return std::numeric_limits<double>::infinity();
    s += p[k] * std::log(p[k] / q[k]);
  }
  return s;
}

// Visits simplex points whose first n-1 coordinates lie on lo + j*h within
// [lo_k, hi_k]; the last coordinate is the remainder.
void scan(std::vector<double>& y, std::size_t k, const std::vector<double>& lo, const std::vector<double>& hi, double h,
          double used, const std::function<void(const std::vector<double>&)>& f) {
  const std::size_t n = y.size();
  if (k + 1 == n) {
    y[k] = 1.0 - used;
    if (y[k] >= -1e-15) {
      y[k] = std::max(0.0, y[k]);
      f(y);
    }
    return;
  }
  const int steps = static_cast<int>(std::floor((hi[k] - lo[k]) / h + 1e-9));
  for (int j = 0; j <= steps; ++j) {
    const double v = lo[k] + j * h;
    if (v < 0.0 || used + v > 1.0 + 1e-15) continue;
    y[k] = v;
    scan(y, k + 1, lo, hi, h, used + v, f);
  }
}

}  // namespace

GridResult grid_kl_project(std::span<const double> row, TokenId v, double resolution) {
  const std::size_t n = row.size();
  if (v >= n) throw std::invalid_argument("grid_kl_project: token outside vocabulary");
  if (std::all_of(row.begin(), row.end(), [&](double x) { return x <= row[v]; })) {
    return {std::vector<double>(row.begin(), row.end()), 0.0};
  }
  // The optimum sits on the face y_v = max competitor. Scanning v as the
  // first lattice coordinate (never the remainder) keeps that face on the
  // lattice; the tolerance absorbs rounding in the lattice sums.
  const auto swap_v = [&](std::vector<double> y) {
    std::swap(y[0], y[v]);
    return y;
  };
  const std::vector<double> perm = swap_v(std::vector<double>(row.begin(), row.end()));
  GridResult best{std::vector<double>(n, 0.0), std::numeric_limits<double>::infinity()};
  auto visit = [&](const std::vector<double>& y) {
    for (std::size_t u = 1; u < n; ++u) {
      if (y[u] > y[0] + 1e-12) return;
    }
    const double kl = kl_or_inf(perm, y);
    if (kl < best.kl) best = {y, kl};
  };

  double h = 0.05;
  std::vector<double> y(n), lo(n, 0.0), hi(n, 1.0);
  scan(y, 0, lo, hi, h, 0.0, visit);
  while (h > resolution) {
    const double coarse = h;
    h /= 4.0;
    const std::vector<double> centre = best.point;
    for (std::size_t k = 0; k < n; ++k) {
      lo[k] = centre[k] - 2.0 * coarse;
      hi[k] = centre[k] + 2.0 * coarse;
    }
    scan(y, 0, lo, hi, h, 0.0, visit);
  }
  best.point = swap_v(best.point);
  return best;
}

std::optional<double> enumerate_constrained_kl(const SeqDist& x_in, const std::function<bool(const Sequence&)>& feasible,
                                               double resolution) {
  const std::size_t len = x_in.length();
  const std::size_t n = x_in.vocab_size();
  std::vector<double> row_cost(len * n);
  for (std::size_t i = 0; i < len; ++i) {
    for (TokenId v = 0; v < n; ++v) row_cost[i * n + v] = grid_kl_project(x_in.row(i), v, resolution).kl;
  }
  std::optional<double> best;
  for_each_sequence(len, n, [&](const Sequence& s) {
    if (!feasible(s)) return;
    double c = 0.0;
    for (std::size_t i = 0; i < len; ++i) c += row_cost[i * n + s[i]];
    if (!best || c < *best) best = c;
  });
  return best;
}

std::optional<NoveltyAnswer> enumerate_novelty(const SeqDist& x_in,
                                               const std::unordered_set<Sequence, SequenceHash>& db) {
  const std::size_t len = x_in.length();
  const std::size_t n = x_in.vocab_size();
  std::optional<NoveltyAnswer> best;
  for_each_sequence(len, n, [&](const Sequence& s) {
    if (db.contains(s)) return;
    double c = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      double mx = 0.0;
      for (TokenId u = 0; u < n; ++u) mx = std::max(mx, x_in(i, u));
      c += mx - x_in(i, s[i]);
    }
    if (!best || c < best->cost) best = NoveltyAnswer{s, c};
  });
  return best;
}

double total_variation(const std::vector<std::pair<Sequence, double>>& p,
                       const std::vector<std::pair<Sequence, double>>& q) {
  std::map<Sequence, double> diff;
  for (const auto& [s, w] : p) diff[s] += w;
  for (const auto& [s, w] : q) diff[s] -= w;
  double tv = 0.0;
  for (const auto& [s, d] : diff) tv += std::abs(d);
  return 0.5 * tv;
}

}  // namespace cdiff::oracle
