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

#include "cdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cdiff {

SeqDist prior_marginals(const Corpus& corpus, std::size_t vocab_size) {
  const std::size_t len = corpus.length();
  std::vector<double> p(len * vocab_size, 0.0);
  for (const auto& e : corpus.entries()) {
    e.seq.check_range(vocab_size);
    for (std::size_t i = 0; i < len; ++i) p[i * vocab_size + e.seq[i]] += e.weight;
  }
  return SeqDist::normalized(len, vocab_size, std::move(p));
}

std::optional<SeqDist> exact_posterior(const Corpus& corpus, const NoiseKernel& kernel, const Sequence& xt_decoded,
                                       double a_t) {
  if (!(a_t >= 0.0 && a_t <= 1.0)) throw std::invalid_argument("exact_posterior: a_t outside [0, 1]");
  const std::size_t len = xt_decoded.size();
  const std::size_t n = kernel.vocab_size();
  if (corpus.length() != len) throw std::invalid_argument("exact_posterior: corpus length differs from x_t");
  xt_decoded.check_range(n);

  const bool masked = kernel.kind() == KernelKind::kMasked;
  const TokenId mask = masked ? *kernel.mask_id() : 0;
  const double log_keep = std::log(a_t);
  const double log_drop = masked ? std::log1p(-a_t) : std::log((1.0 - a_t) / static_cast<double>(n));
  const double log_match = masked ? log_keep : std::log(a_t + (1.0 - a_t) / static_cast<double>(n));
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  // Log joint weight(x_0) * prod_i p(x_t^i | x_0^i) per entry.
  std::vector<double> log_post(corpus.size(), kNegInf);
  double best = kNegInf;
  for (std::size_t e = 0; e < corpus.size(); ++e) {
    const auto& x0 = corpus.entries()[e].seq;
    double lp = std::log(corpus.entries()[e].weight);
    for (std::size_t i = 0; i < len && lp > kNegInf; ++i) {
      if (masked && x0[i] == mask) throw std::invalid_argument("corpus contains the MASK token");
      if (masked) {
        lp += xt_decoded[i] == mask ? log_drop : (xt_decoded[i] == x0[i] ? log_keep : kNegInf);
      } else {
        lp += xt_decoded[i] == x0[i] ? log_match : log_drop;
      }
    }
    log_post[e] = lp;
    best = std::max(best, lp);
  }
  if (best == kNegInf) return std::nullopt;

  std::vector<double> marg(len * n, 0.0);
  double total = 0.0;
  for (std::size_t e = 0; e < corpus.size(); ++e) {
    if (log_post[e] == kNegInf) continue;
    const double w = std::exp(log_post[e] - best);
    total += w;
    const auto& x0 = corpus.entries()[e].seq;
    for (std::size_t i = 0; i < len; ++i) marg[i * n + x0[i]] += w;
  }
  for (double& m : marg) m /= total;
  return SeqDist(len, n, std::move(marg));
}

ExactDenoiser::ExactDenoiser(std::shared_ptr<const Corpus> corpus, std::size_t vocab_size)
    : corpus_(std::move(corpus)), prior_(prior_marginals(*corpus_, vocab_size)) {}

SeqDist ExactDenoiser::denoise(const SeqDist& xt, double a_t, const NoiseKernel& kernel) const {
  if (auto post = exact_posterior(*corpus_, kernel, decode(xt), a_t)) return std::move(*post);
  fallbacks_.fetch_add(1, std::memory_order_relaxed);
  return prior_;
}

}  // namespace cdiff
