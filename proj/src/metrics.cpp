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

#include "cdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace cdiff {

namespace {

std::vector<std::pair<Sequence, double>> rescaled(const Corpus& corpus) {
  std::vector<std::pair<Sequence, double>> out;
  const double scale = static_cast<double>(corpus.size());
  for (const auto& e : corpus.entries()) out.emplace_back(e.seq, e.weight * scale);
  return out;
}

}  // namespace

BigramModel::BigramModel(const std::vector<std::pair<Sequence, double>>& counts, std::size_t vocab_size, double kappa)
    : n_(vocab_size), kappa_(kappa), counts_(vocab_size + 1, vocab_size + 1), totals_(vocab_size + 1, 0.0) {
  if (!(kappa > 0.0)) throw std::invalid_argument("bigram: kappa must be positive");
  if (vocab_size == 0) throw std::invalid_argument("bigram: empty vocabulary");
  for (const auto& [seq, w] : counts) {
    if (w < 0.0) throw std::invalid_argument("bigram: negative count");
    seq.check_range(n_);
    std::size_t prev = n_;
    for (std::size_t i = 0; i <= seq.size(); ++i) {
      const std::size_t next = i < seq.size() ? seq[i] : n_;
      counts_(prev, next) += w;
      totals_[prev] += w;
      prev = next;
    }
  }
}

BigramModel::BigramModel(const Corpus& corpus, std::size_t vocab_size, double kappa)
    : BigramModel(rescaled(corpus), vocab_size, kappa) {}

double BigramModel::prob(std::size_t prev, std::size_t next) const {
  if (prev > n_ || next > n_) throw std::out_of_range("bigram: index outside vocabulary");
  return (counts_(prev, next) + kappa_) / (totals_[prev] + kappa_ * static_cast<double>(n_ + 1));
}

double violation_rate(const std::vector<Sequence>& seqs, const ConstraintSet& cs) {
  if (seqs.empty()) return 0.0;
  std::size_t bad = 0;
  for (const auto& s : seqs) {
    if (max_hard_violation(cs, s) > 0.0) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(seqs.size());
}

double perplexity(const Sequence& seq, const BigramModel& model) {
  seq.check_range(model.vocab_size());
  double logp = 0.0;
  std::size_t prev = model.begin_marker();
  for (std::size_t i = 0; i <= seq.size(); ++i) {
    const std::size_t next = i < seq.size() ? seq[i] : model.end_marker();
    logp += std::log(model.prob(prev, next));
    prev = next;
  }
  return std::exp(-logp / static_cast<double>(seq.size() + 1));
}

double entropy(const Sequence& seq) {
  if (seq.size() == 0) throw std::invalid_argument("entropy: empty sequence");
  std::map<TokenId, std::size_t> counts;
  for (TokenId t : seq.ids()) ++counts[t];
  const double len = static_cast<double>(seq.size());
  double h = 0.0;
  for (const auto& [t, c] : counts) {
    const double p = static_cast<double>(c) / len;
    h -= p * std::log(p);
  }
  return h;
}

std::size_t novelty_count(const std::vector<Sequence>& seqs, const NoveltyDb& db) {
  std::unordered_set<Sequence, SequenceHash> novel;
  for (const auto& s : seqs) {
    if (!db.contains(s)) novel.insert(s);
  }
  return novel.size();
}

MetricsSummary summarize(const std::vector<Sequence>& seqs, const BigramModel& model, const ConstraintSet* cs,
                         const NoveltyDb* db) {
  MetricsSummary m;
  m.n_samples = seqs.size();
  if (seqs.empty()) return m;
  if (cs) m.violation_rate = violation_rate(seqs, *cs);
  if (db) m.novelty_count = novelty_count(seqs, *db);
  std::vector<double> ppl;
  ppl.reserve(seqs.size());
  double ent = 0.0;
  for (const auto& s : seqs) {
    ppl.push_back(perplexity(s, model));
    ent += entropy(s);
  }
  double sum = 0.0;
  for (double p : ppl) sum += p;
  m.mean_perplexity = sum / static_cast<double>(ppl.size());
  m.mean_entropy = ent / static_cast<double>(seqs.size());
  std::sort(ppl.begin(), ppl.end());
  const std::size_t h = ppl.size() / 2;
  m.median_perplexity = ppl.size() % 2 ? ppl[h] : 0.5 * (ppl[h - 1] + ppl[h]);
  return m;
}

std::string to_json(const MetricsSummary& m) {
  nlohmann::ordered_json j;
  j["violation_rate"] = m.violation_rate;
  j["mean_perplexity"] = m.mean_perplexity;
  j["median_perplexity"] = m.median_perplexity;
  j["mean_entropy"] = m.mean_entropy;
  j["novelty_count"] = m.novelty_count;
  j["n_samples"] = m.n_samples;
  return j.dump(2) + "\n";
}

}  // namespace cdiff
