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

#include "cdiff/relax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cdiff/random.hpp"

namespace cdiff {

void RelaxConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("relaxation temperature must be positive");
  }
}

Matrix gumbel_noise(std::size_t length, std::size_t vocab_size, const RelaxConfig& cfg) {
  Matrix xi(length, vocab_size, 0.0);
  if (!cfg.stochastic) return xi;
  Rng rng(cfg.seed);
  // Open interval so that -log(-log(u)) stays finite.
  std::uniform_real_distribution<double> unif(std::nextafter(0.0, 1.0), 1.0);
  for (double& g : xi.values) g = -std::log(-std::log(unif(rng)));
  return xi;
}

namespace {

std::vector<double> softmax_row(std::span<const double> row, std::span<const double> noise, double temp) {
  std::vector<double> u(row.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < row.size(); ++v) {
    u[v] = (std::log(std::max(row[v], kProbabilityFloor)) + noise[v]) / temp;
    mx = std::max(mx, u[v]);
  }
  double z = 0.0;
  for (double& x : u) {
    x = std::exp(x - mx);
    z += x;
  }
  for (double& x : u) x /= z;
  return u;
}

}  // namespace

SeqDist gumbel_softmax(const SeqDist& d, const RelaxConfig& cfg) {
  cfg.validate();
  const Matrix xi = gumbel_noise(d.length(), d.vocab_size(), cfg);
  std::vector<double> out;
  out.reserve(d.values().size());
  for (std::size_t i = 0; i < d.length(); ++i) {
    auto phi = softmax_row(d.row(i), xi.row(i), cfg.temperature);
    out.insert(out.end(), phi.begin(), phi.end());
  }
  return SeqDist(d.length(), d.vocab_size(), std::move(out));
}

std::vector<Matrix> gumbel_softmax_jacobian(const SeqDist& d, const RelaxConfig& cfg) {
  cfg.validate();
  const std::size_t n = d.vocab_size();
  const Matrix xi = gumbel_noise(d.length(), n, cfg);
  std::vector<Matrix> jac;
  jac.reserve(d.length());
  for (std::size_t i = 0; i < d.length(); ++i) {
    auto row = d.row(i);
    auto phi = softmax_row(row, xi.row(i), cfg.temperature);
    Matrix j(n, n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      if (row[v] <= kProbabilityFloor) continue;
      const double scale = 1.0 / (cfg.temperature * row[v]);
      for (std::size_t k = 0; k < n; ++k) j(k, v) = phi[k] * ((k == v ? 1.0 : 0.0) - phi[v]) * scale;
    }
    jac.push_back(std::move(j));
  }
  return jac;
}

}  // namespace cdiff
