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
#include <vector>

#include "cdiff/core.hpp"

namespace cdiff {

struct RelaxConfig {
  double temperature = 0.5;
  /// Adds Gumbel(0, 1) noise drawn from `seed`; otherwise the noise is zero.
  bool stochastic = false;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Entries are clamped to this before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

/// Gumbel noise field used by the relaxation (all zeros when deterministic).
Matrix gumbel_noise(std::size_t length, std::size_t vocab_size, const RelaxConfig& cfg);

/// Row-wise softmax((log max(d, floor) + xi) / temperature).
SeqDist gumbel_softmax(const SeqDist& d, const RelaxConfig& cfg);

/// Per-position N x N Jacobians d phi_j / d d_v, one Matrix per row of d.
/// Entries clamped by the floor have zero derivative.
std::vector<Matrix> gumbel_softmax_jacobian(const SeqDist& d, const RelaxConfig& cfg);

}  // namespace cdiff
