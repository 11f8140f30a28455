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

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cdiff/core.hpp"
#include "cdiff/random.hpp"

namespace cdiff {

enum class KernelKind { kMasked, kUniform };

std::string_view to_string(KernelKind k);
KernelKind parse_kernel_kind(std::string_view s);

/// Corruption kernel: x_t ~ Cat(a_t * onehot(x_0) + (1 - a_t) * reference).
/// The masked kernel absorbs into the MASK token; the uniform kernel
/// corrupts toward 1/N.
class NoiseKernel {
 public:
  static NoiseKernel masked(std::size_t vocab_size, TokenId mask_id);
  static NoiseKernel uniform(std::size_t vocab_size);
  /// Masked kernels need a vocabulary with a declared MASK token.
  static NoiseKernel for_vocabulary(KernelKind kind, const Vocabulary& vocab);

  KernelKind kind() const { return kind_; }
  std::size_t vocab_size() const { return reference_.size(); }
  std::span<const double> reference() const { return reference_; }
  std::optional<TokenId> mask_id() const { return mask_id_; }

  /// True when a state row is still at the reference (not yet denoised).
  /// Only the masked kernel has such rows: argmax == mask_id.
  bool at_reference(std::span<const double> row) const;

 private:
  NoiseKernel(KernelKind kind, std::vector<double> reference, std::optional<TokenId> mask_id);

  KernelKind kind_;
  std::vector<double> reference_;
  std::optional<TokenId> mask_id_;
};

SeqDist forward_marginal(const NoiseKernel& k, const Sequence& x0, double a_t);

Sequence forward_sample(const NoiseKernel& k, const Sequence& x0, double a_t, Rng& rng);
Sequence forward_sample(const NoiseKernel& k, const Sequence& x0, double a_t, std::uint64_t seed);

/// Categorical law of one position at the less-noisy level a_s given its
/// current row and the denoiser's clean-token row at level a_t.
///
/// Masked kernel: settled rows map to themselves; rows at MASK map to
/// ((1 - a_s) * reference + (a_s - a_t) * denoised) / (1 - a_t).
/// Uniform kernel: the exact posterior sum_v denoised(v) q(x_s | x_t, x_0 = v),
/// conditioned on the row's decoded token.
std::vector<double> reverse_transition(const NoiseKernel& k, std::span<const double> xt_row,
                                       std::span<const double> denoised_row, double a_t, double a_s);

/// One ancestral reverse step from level a_t to a_s (a_s > a_t). Settled
/// masked rows are carried over unchanged; every other row becomes a one-hot
/// draw from reverse_transition. Throws std::invalid_argument if a_t == 1 or
/// a_s <= a_t.
SeqDist reverse_step(const NoiseKernel& k, const SeqDist& xt, const SeqDist& denoised, double a_t, double a_s,
                     Rng& rng);
SeqDist reverse_step(const NoiseKernel& k, const SeqDist& xt, const SeqDist& denoised, double a_t, double a_s,
                     std::uint64_t seed);

}  // namespace cdiff
