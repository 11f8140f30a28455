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

#include "cdiff/kernel.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cdiff {

std::string_view to_string(KernelKind k) {
  return k == KernelKind::kMasked ? "masked" : "uniform";
}

KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "masked") return KernelKind::kMasked;
  if (s == "uniform") return KernelKind::kUniform;
  throw std::invalid_argument("unknown kernel kind '" + std::string(s) + "'");
}

NoiseKernel::NoiseKernel(KernelKind kind, std::vector<double> reference, std::optional<TokenId> mask_id)
    : kind_(kind), reference_(std::move(reference)), mask_id_(mask_id) {}

NoiseKernel NoiseKernel::masked(std::size_t vocab_size, TokenId mask_id) {
  if (vocab_size < 2 || mask_id >= vocab_size) throw std::invalid_argument("masked kernel: bad mask id");
  std::vector<double> ref(vocab_size, 0.0);
  ref[mask_id] = 1.0;
  return NoiseKernel(KernelKind::kMasked, std::move(ref), mask_id);
}

NoiseKernel NoiseKernel::uniform(std::size_t vocab_size) {
  if (vocab_size < 2) throw std::invalid_argument("uniform kernel: N must be >= 2");
  return NoiseKernel(KernelKind::kUniform, std::vector<double>(vocab_size, 1.0 / static_cast<double>(vocab_size)),
                     std::nullopt);
}

NoiseKernel NoiseKernel::for_vocabulary(KernelKind kind, const Vocabulary& vocab) {
  if (kind == KernelKind::kUniform) return uniform(vocab.size());
  if (!vocab.mask_id()) throw std::invalid_argument("masked kernel requires a #mask token in the vocabulary");
  return masked(vocab.size(), *vocab.mask_id());
}

bool NoiseKernel::at_reference(std::span<const double> row) const {
  return kind_ == KernelKind::kMasked && argmax(row) == *mask_id_;
}

SeqDist forward_marginal(const NoiseKernel& k, const Sequence& x0, double a_t) {
  if (!(a_t >= 0.0 && a_t <= 1.0)) throw std::invalid_argument("forward_marginal: a_t outside [0, 1]");
  const std::size_t n = k.vocab_size();
  x0.check_range(n);
  std::vector<double> p(x0.size() * n);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    for (std::size_t v = 0; v < n; ++v) p[i * n + v] = (1.0 - a_t) * k.reference()[v];
    p[i * n + x0[i]] += a_t;
  }
  return SeqDist(x0.size(), n, std::move(p));
}

Sequence forward_sample(const NoiseKernel& k, const Sequence& x0, double a_t, Rng& rng) {
  SeqDist marg = forward_marginal(k, x0, a_t);
  std::vector<TokenId> ids(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) ids[i] = sample_categorical(marg.row(i), rng);
  return Sequence(std::move(ids));
}

Sequence forward_sample(const NoiseKernel& k, const Sequence& x0, double a_t, std::uint64_t seed) {
  Rng rng(seed);
  return forward_sample(k, x0, a_t, rng);
}

std::vector<double> reverse_transition(const NoiseKernel& k, std::span<const double> xt_row,
                                       std::span<const double> denoised_row, double a_t, double a_s) {
  if (a_t >= 1.0) throw std::invalid_argument("reverse step undefined at a_t = 1");
  if (!(a_s > a_t) || a_s > 1.0 || a_t < 0.0) throw std::invalid_argument("reverse step needs 0 <= a_t < a_s <= 1");
  const std::size_t n = k.vocab_size();
  if (xt_row.size() != n || denoised_row.size() != n) throw std::invalid_argument("reverse step: width mismatch");

  std::vector<double> out(n, 0.0);
  if (k.kind() == KernelKind::kMasked) {
    if (!k.at_reference(xt_row)) return {xt_row.begin(), xt_row.end()};
    const double w_ref = (1.0 - a_s) / (1.0 - a_t);
    const double w_den = (a_s - a_t) / (1.0 - a_t);
    assert(std::abs(w_ref + w_den - 1.0) < 1e-9);
    for (std::size_t v = 0; v < n; ++v) out[v] = w_ref * k.reference()[v] + w_den * denoised_row[v];
    return out;
  }

  // Uniform: q(x_s | x_t, x_0) ∝ q(x_t | x_s) q(x_s | x_0), mixed over the
  // denoiser's clean-token row.
  const TokenId xt = argmax(xt_row);
  const double u = 1.0 / static_cast<double>(n);
  const double keep = a_t / a_s;
  std::vector<double> component(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (denoised_row[v] <= 0.0) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double step = keep * (j == xt ? 1.0 : 0.0) + (1.0 - keep) * u;
      const double prior = a_s * (j == v ? 1.0 : 0.0) + (1.0 - a_s) * u;
      component[j] = step * prior;
      z += component[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] += denoised_row[v] * component[j] / z;
  }
  return out;
}

SeqDist reverse_step(const NoiseKernel& k, const SeqDist& xt, const SeqDist& denoised, double a_t, double a_s,
                     Rng& rng) {
  if (xt.length() != denoised.length() || xt.vocab_size() != denoised.vocab_size() ||
      xt.vocab_size() != k.vocab_size()) {
    throw std::invalid_argument("reverse_step: shape mismatch");
  }
  if (a_t >= 1.0) throw std::invalid_argument("reverse step undefined at a_t = 1");
  if (!(a_s > a_t) || a_s > 1.0 || a_t < 0.0) throw std::invalid_argument("reverse step needs 0 <= a_t < a_s <= 1");
  const std::size_t n = k.vocab_size();
  std::vector<double> out(xt.length() * n, 0.0);
  for (std::size_t i = 0; i < xt.length(); ++i) {
    auto row = xt.row(i);
    if (k.kind() == KernelKind::kMasked && !k.at_reference(row)) {
      std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(i * n));
      continue;
    }
    auto trans = reverse_transition(k, row, denoised.row(i), a_t, a_s);
    double sum = 0.0;
    for (double p : trans) sum += p;
    if (std::abs(sum - 1.0) > 1e-9) throw std::logic_error("reverse transition does not sum to one");
    out[i * n + sample_categorical(trans, rng)] = 1.0;
  }
  return SeqDist(xt.length(), n, std::move(out));
}

SeqDist reverse_step(const NoiseKernel& k, const SeqDist& xt, const SeqDist& denoised, double a_t, double a_s,
                     std::uint64_t seed) {
  Rng rng(seed);
  return reverse_step(k, xt, denoised, a_t, a_s, rng);
}

}  // namespace cdiff
