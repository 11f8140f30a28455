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
#include <limits>
#include <sstream>

#include "cdiff/core.hpp"
#include "cdiff/corpus_io.hpp"
#include "cdiff/random.hpp"
#include "doctest.h"

using namespace cdiff;

namespace {

SeqDist rows(std::size_t len, std::size_t n, std::vector<double> p) { return SeqDist(len, n, std::move(p)); }

SeqDist random_rows(std::size_t len, std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> w(len * n);
  for (double& x : w) x = u(rng);
  return SeqDist::normalized(len, n, std::move(w));
}

}  // namespace

TEST_CASE("decode picks the row maximum") {
  CHECK(decode(rows(1, 3, {0.2, 0.7, 0.1}))[0] == 1);
  CHECK(decode(rows(1, 2, {0.5, 0.5}))[0] == 0);
  CHECK(decode(rows(2, 2, {1, 0, 0, 1})) == Sequence({0, 1}));
}

TEST_CASE("decode is unchanged by row rescaling") {
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const SeqDist d = random_rows(4, 5, rng);
    std::vector<double> scaled = d.values();
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t v = 0; v < 5; ++v) scaled[i * 5 + v] *= 1.0 + i;
    }
    CHECK(decode(SeqDist::normalized(4, 5, scaled)) == decode(d));
  }
}

TEST_CASE("alpha endpoints and values") {
  const Schedule lin(ScheduleKind::kLinear, 10);
  CHECK(alpha(lin, 0) == 1.0);
  CHECK(alpha(lin, 10) == 0.0);
  const Schedule log(ScheduleKind::kLogLinear, 10);
  CHECK(alpha(log, 5) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(alpha(log, 0) == 1.0);
  CHECK(alpha(log, 10) <= 1e-4);
  CHECK_THROWS_AS(alpha(lin, 11), std::out_of_range);
  CHECK_THROWS_AS(alpha(lin, -1), std::out_of_range);
}

TEST_CASE("alpha is strictly decreasing") {
  for (auto kind : {ScheduleKind::kLinear, ScheduleKind::kLogLinear}) {
    const Schedule s(kind, 50);
    for (int t = 1; t <= 50; ++t) CHECK(alpha(s, t) < alpha(s, t - 1));
  }
}

TEST_CASE("kl_divergence values") {
  const SeqDist p = rows(1, 2, {0.9, 0.1});
  CHECK(kl_divergence(p, p) == 0.0);
  CHECK(kl_divergence(rows(1, 2, {1, 0}), rows(1, 2, {0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(kl_divergence(p, rows(1, 2, {0.5, 0.5})) ==
        doctest::Approx(0.9 * std::log(1.8) + 0.1 * std::log(0.2)).epsilon(1e-12));
  CHECK(std::isinf(kl_divergence(rows(1, 2, {0.5, 0.5}), rows(1, 2, {1, 0}))));
  CHECK_THROWS_AS(kl_divergence(p, rows(1, 3, {0.2, 0.3, 0.5})), std::invalid_argument);
}

TEST_CASE("kl_divergence is non-negative and zero only on equal rows") {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const SeqDist p = random_rows(3, 4, rng);
    const SeqDist q = random_rows(3, 4, rng);
    CHECK(kl_divergence(p, q) > 0.0);
    CHECK(kl_divergence(p, p) == 0.0);
  }
}

TEST_CASE("SeqDist rejects rows off the simplex") {
  CHECK_THROWS_AS(SeqDist(1, 2, {0.6, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(SeqDist(1, 2, {1.1, -0.1}), std::invalid_argument);
  CHECK_THROWS_AS(SeqDist(1, 2, {std::numeric_limits<double>::quiet_NaN(), 1.0}), std::invalid_argument);
  CHECK_NOTHROW(SeqDist(1, 2, {0.5, 0.5 + 1e-10}));
}

TEST_CASE("Vocabulary invariants") {
  CHECK_THROWS(Vocabulary({"a"}));
  CHECK_THROWS(Vocabulary({"a", "a"}));
  CHECK_THROWS(Vocabulary({"a", "b"}, 2));
  const Vocabulary v({"a", "b", "[M]"}, 2);
  CHECK(v.id("b") == 1);
  CHECK(v.mask_id() == 2);
  CHECK_THROWS_AS(v.id("zzz"), std::out_of_range);
}

TEST_CASE("Sequence range check") {
  CHECK_THROWS(Sequence(std::vector<TokenId>{}));
  CHECK_THROWS(Sequence({0, 3}).check_range(3));
  CHECK_NOTHROW(Sequence({0, 2}).check_range(3));
}

TEST_CASE("Corpus merges duplicates and normalizes") {
  const Corpus c({{Sequence({0, 1}), 1.0}, {Sequence({1, 1}), 2.0}, {Sequence({0, 1}), 1.0}});
  REQUIRE(c.size() == 2);
  double total = 0.0;
  for (const auto& e : c.entries()) {
    total += e.weight;
    CHECK(e.weight == doctest::Approx(0.5));
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK_THROWS(Corpus({{Sequence({0, 1}), 1.0}, {Sequence({0}), 1.0}}));
  CHECK_THROWS(Corpus({}));
}

TEST_CASE("vocabulary and corpus text formats") {
  std::istringstream vin("#mask [M]\na\nb\n\nc\n");
  const Vocabulary v = parse_vocabulary(vin);
  CHECK(v.size() == 4);
  CHECK(v.token(3) == "[M]");
  CHECK(v.mask_id() == 3);

  std::istringstream cin("a b\t3\nb c\n\n");
  const Corpus c = parse_corpus(cin, v);
  REQUIRE(c.size() == 2);
  CHECK(c.entries()[0].weight == doctest::Approx(0.75));

  std::istringstream bad("a q\n");
  CHECK_THROWS_AS(parse_corpus(bad, v), ParseError);
  std::istringstream empty("\n\n");
  CHECK_THROWS_AS(parse_corpus(empty, v), ParseError);
  std::istringstream ragged("a b\na\n");
  CHECK_THROWS_AS(parse_corpus(ragged, v), ParseError);

  std::ostringstream out;
  write_sequences(out, {Sequence({0, 2})}, v);
  CHECK(out.str() == "a c\n");
}
