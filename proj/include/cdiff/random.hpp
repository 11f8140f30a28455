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
#include <initializer_list>
#include <random>
#include <span>

#include "cdiff/core.hpp"

namespace cdiff {

using Rng = std::mt19937_64;

/// Mixes a base seed with stream coordinates (sample, step, attempt...) so
/// that every stream is reproducible independently of evaluation order.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords);

/// Inverse-CDF draw from an unnormalized non-negative weight vector.
TokenId sample_categorical(std::span<const double> weights, Rng& rng);

}  // namespace cdiff
