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

#include <atomic>
#include <memory>
#include <optional>

#include "cdiff/core.hpp"
#include "cdiff/kernel.hpp"

namespace cdiff {

/// Clean-token predictor: given the current state at signal level a_t,
/// returns per-position posterior marginals over clean tokens. Under the
/// masked kernel the output never puts mass on the MASK token.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual SeqDist denoise(const SeqDist& xt, double a_t, const NoiseKernel& kernel) const = 0;
};

/// Per-position marginals of the corpus prior.
SeqDist prior_marginals(const Corpus& corpus, std::size_t vocab_size);

/// Bayes posterior p(x_0 | x_t) over corpus entries, reduced to per-position
/// marginals. Returns nullopt when no corpus entry is compatible with x_t
/// (masked kernel with an unmasked token no entry has, or a_t == 1 under the
/// uniform kernel with an off-corpus state).
std::optional<SeqDist> exact_posterior(const Corpus& corpus, const NoiseKernel& kernel, const Sequence& xt_decoded,
                                       double a_t);

/// Exact posterior over a corpus, conditioned on the decoded state. Falls
/// back to the prior marginals when the evidence has empty support.
class ExactDenoiser final : public Denoiser {
 public:
  ExactDenoiser(std::shared_ptr<const Corpus> corpus, std::size_t vocab_size);

  SeqDist denoise(const SeqDist& xt, double a_t, const NoiseKernel& kernel) const override;

  const Corpus& corpus() const { return *corpus_; }
  /// Number of calls that hit the empty-support fallback.
  std::size_t fallback_count() const { return fallbacks_.load(std::memory_order_relaxed); }

 private:
  std::shared_ptr<const Corpus> corpus_;
  SeqDist prior_;
  mutable std::atomic<std::size_t> fallbacks_{0};
};

}  // namespace cdiff
