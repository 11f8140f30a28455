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

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cdiff/kernel.hpp"
#include "doctest.h"

using namespace cdiff;

TEST_CASE("forward_marginal rows") {
  const NoiseKernel m = NoiseKernel::masked(3, 2);
  const SeqDist d = forward_marginal(m, Sequence({0}), 0.6);
  CHECK(d(0, 0) == doctest::Approx(0.6));
  CHECK(d(0, 1) == 0.0);
  CHECK(d(0, 2) == doctest::Approx(0.4));

  for (const NoiseKernel& k : {NoiseKernel::masked(4, 3), NoiseKernel::uniform(4)}) {
    const SeqDist clean = forward_marginal(k, Sequence({1, 0}), 1.0);
    CHECK(clean.values() == SeqDist::one_hot(Sequence({1, 0}), 4).values());
  }
  const SeqDist noisy = forward_marginal(NoiseKernel::uniform(4), Sequence({2}), 0.0);
  for (TokenId v = 0; v < 4; ++v) CHECK(noisy(0, v) == doctest::Approx(0.25));
}

TEST_CASE("forward_sample endpoints and determinism") {
  const NoiseKernel m = NoiseKernel::masked(5, 4);
  const Sequence x0({0, 1, 2, 3, 1});
  CHECK(forward_sample(m, x0, 1.0, 7) == x0);
  CHECK(forward_sample(m, x0, 0.0, 7) == Sequence({4, 4, 4, 4, 4}));
  CHECK(forward_sample(NoiseKernel::uniform(5), x0, 0.3, 99) == forward_sample(NoiseKernel::uniform(5), x0, 0.3, 99));
}

TEST_CASE("forward_sample frequencies within three standard deviations") {
  const int draws = 20000;
  for (const NoiseKernel& k : {NoiseKernel::masked(4, 3), NoiseKernel::uniform(4)}) {
    const Sequence x0({1, 2});
    const double a = 0.35;
    const SeqDist p = forward_marginal(k, x0, a);
    std::vector<int> counts(2 * 4, 0);
    Rng rng(5);
    for (int d = 0; d < draws; ++d) {
      const Sequence s = forward_sample(k, x0, a, rng);
      for (std::size_t i = 0; i < 2; ++i) ++counts[i * 4 + s[i]];
    }
    for (std::size_t i = 0; i < 2; ++i) {
      for (TokenId v = 0; v < 4; ++v) {
        const double q = p(i, v);
        const double sd = std::sqrt(draws * q * (1.0 - q));
        CHECK(std::abs(counts[i * 4 + v] - draws * q) <= 3.0 * sd + 1e-9);
      }
    }
  }
}

TEST_CASE("masked reverse step keeps settled rows") {
  const NoiseKernel m = NoiseKernel::masked(5, 4);
  const SeqDist xt = SeqDist::one_hot(Sequence({3, 4}), 5);
  const SeqDist den = SeqDist::normalized(2, 5, {1, 1, 1, 1, 0, 1, 1, 1, 1, 0});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SeqDist next = reverse_step(m, xt, den, 0.3, 0.5, seed);
    CHECK(next(0, 3) == 1.0);
  }
}

TEST_CASE("masked reverse transition mixture") {
  const NoiseKernel m = NoiseKernel::masked(3, 2);
  const std::vector<double> mask_row{0, 0, 1};
  const std::vector<double> den{0.5, 0.5, 0};
  const auto mix = reverse_transition(m, mask_row, den, 0.2, 0.6);
  CHECK(mix[0] == doctest::Approx(0.25));
  CHECK(mix[1] == doctest::Approx(0.25));
  CHECK(mix[2] == doctest::Approx(0.5));

  const std::vector<double> den2{0.1, 0.9, 0};
  const auto full = reverse_transition(m, mask_row, den2, 0.0, 1.0);
  CHECK(full[0] == doctest::Approx(0.1));
  CHECK(full[1] == doctest::Approx(0.9));
  CHECK(full[2] == doctest::Approx(0.0));
}

TEST_CASE("reverse step rejects a_t = 1 and a_s <= a_t") {
  const NoiseKernel m = NoiseKernel::masked(3, 2);
  const SeqDist xt = SeqDist::one_hot(Sequence({2}), 3);
  const SeqDist den(1, 3, {0.5, 0.5, 0.0});
  CHECK_THROWS_AS(reverse_step(m, xt, den, 1.0, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(reverse_step(m, xt, den, 0.5, 0.4, 0), std::invalid_argument);
}

TEST_CASE("reverse transition composes with the forward marginal") {
  // sum_{x_t} q(x_t | x0, a_t) * p(x_s | x_t, x0) must equal q(x_s | x0, a_s).
  for (std::size_t n = 2; n <= 4; ++n) {
    for (const NoiseKernel& k : {NoiseKernel::masked(n, static_cast<TokenId>(n - 1)), NoiseKernel::uniform(n)}) {
      const TokenId clean_max = k.kind() == KernelKind::kMasked ? static_cast<TokenId>(n - 1) : static_cast<TokenId>(n);
      for (TokenId x0 = 0; x0 < clean_max; ++x0) {
        for (auto [a_t, a_s] : {std::pair{0.1, 0.4}, std::pair{0.0, 0.7}, std::pair{0.55, 0.95}}) {
          const SeqDist qt = forward_marginal(k, Sequence({x0}), a_t);
          const SeqDist qs = forward_marginal(k, Sequence({x0}), a_s);
          std::vector<double> den(n, 0.0);
          den[x0] = 1.0;
          std::vector<double> composed(n, 0.0);
          for (TokenId xt = 0; xt < n; ++xt) {
            if (qt(0, xt) == 0.0) continue;
            std::vector<double> row(n, 0.0);
            row[xt] = 1.0;
            const auto tr = reverse_transition(k, row, den, a_t, a_s);
            CHECK(std::accumulate(tr.begin(), tr.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
            for (TokenId xs = 0; xs < n; ++xs) composed[xs] += qt(0, xt) * tr[xs];
          }
          for (TokenId xs = 0; xs < n; ++xs) CHECK(composed[xs] == doctest::Approx(qs(0, xs)).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("masked reverse steps never re-mask") {
  const NoiseKernel m = NoiseKernel::masked(4, 3);
  Rng rng(1);
  SeqDist x = SeqDist::one_hot(Sequence({3, 3, 3, 3, 3}), 4);
  const SeqDist den = SeqDist::normalized(5, 4, {1, 2, 3, 0, 1, 1, 1, 0, 3, 2, 1, 0, 1, 0, 0, 0, 0, 1, 0, 0});
  std::vector<bool> settled(5, false);
  const Schedule sched(ScheduleKind::kLinear, 10);
  for (int t = 10; t >= 1; --t) {
    x = reverse_step(m, x, den, alpha(sched, t), alpha(sched, t - 1), rng);
    for (std::size_t i = 0; i < 5; ++i) {
      const bool now = decode(x)[i] != 3;
      CHECK((now || !settled[i]));
      settled[i] = now;
    }
  }
  CHECK(decode(x)[0] != 3);
}

TEST_CASE("reference rows") {
  const NoiseKernel m = NoiseKernel::masked(3, 1);
  CHECK(m.reference()[1] == 1.0);
  CHECK(m.at_reference(std::vector<double>{0, 1, 0}));
  CHECK_FALSE(m.at_reference(std::vector<double>{1, 0, 0}));
  const NoiseKernel u = NoiseKernel::uniform(4);
  for (double r : u.reference()) CHECK(r == 0.25);
  CHECK_FALSE(u.at_reference(std::vector<double>{0.25, 0.25, 0.25, 0.25}));
}
