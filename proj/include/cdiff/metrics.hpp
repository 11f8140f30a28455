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

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cdiff/constraint.hpp"
#include "cdiff/core.hpp"
#include "cdiff/projection.hpp"

namespace cdiff {

/// Laplace-smoothed bigram model over the vocabulary with BEGIN and END
/// markers. p(next | prev) = (c(prev, next) + kappa) / (c(prev) + kappa * (N + 1)),
/// where next ranges over the N tokens plus END.
class BigramModel {
 public:
  static constexpr double kDefaultKappa = 1.0;

  /// Weighted sequences; weights act as counts.
  BigramModel(const std::vector<std::pair<Sequence, double>>& counts, std::size_t vocab_size,
              double kappa = kDefaultKappa);
  /// Corpus weights are rescaled to average one per distinct sequence.
  BigramModel(const Corpus& corpus, std::size_t vocab_size, double kappa = kDefaultKappa);

  std::size_t vocab_size() const { return n_; }
  double kappa() const { return kappa_; }
  /// prev = N is BEGIN, next = N is END.
  double prob(std::size_t prev, std::size_t next) const;
  std::size_t begin_marker() const { return n_; }
  std::size_t end_marker() const { return n_; }

 private:
  std::size_t n_;
  double kappa_;
  Matrix counts_;  // (N + 1) x (N + 1): rows prev incl. BEGIN, cols next incl. END
  std::vector<double> totals_;
};

/// Share of sequences with any hard violation above zero.
double violation_rate(const std::vector<Sequence>& seqs, const ConstraintSet& cs);

/// exp(-(1 / (L + 1)) * sum log p(next | prev)), END included.
double perplexity(const Sequence& seq, const BigramModel& model);

/// Shannon entropy (nats) of the token frequencies within one sequence.
double entropy(const Sequence& seq);

/// Distinct sequences not in db.
std::size_t novelty_count(const std::vector<Sequence>& seqs, const NoveltyDb& db);

struct MetricsSummary {
  double violation_rate = 0.0;
  double mean_perplexity = 0.0;
  double median_perplexity = 0.0;
  double mean_entropy = 0.0;
  std::size_t novelty_count = 0;
  std::size_t n_samples = 0;
};

/// cs and db may be null; the matching fields are then 0.
MetricsSummary summarize(const std::vector<Sequence>& seqs, const BigramModel& model, const ConstraintSet* cs,
                         const NoveltyDb* db);

/// JSON object with the MetricsSummary field names as keys.
std::string to_json(const MetricsSummary& m);

}  // namespace cdiff
