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

#include "cdiff/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "cdiff/random.hpp"

namespace cdiff {

std::string_view to_string(ProjectionMode m) {
  switch (m) {
    case ProjectionMode::kAlm: return "alm";
    case ProjectionMode::kNovelty: return "novelty";
    case ProjectionMode::kPositional: return "positional";
    case ProjectionMode::kNone: return "none";
  }
  return "?";
}

ProjectionMode parse_projection_mode(std::string_view s) {
  if (s == "alm") return ProjectionMode::kAlm;
  if (s == "novelty") return ProjectionMode::kNovelty;
  if (s == "positional") return ProjectionMode::kPositional;
  if (s == "none") return ProjectionMode::kNone;
  throw std::invalid_argument("unknown projection mode '" + std::string(s) + "'");
}

std::string_view to_string(InfeasiblePolicy p) {
  switch (p) {
    case InfeasiblePolicy::kContinue: return "continue";
    case InfeasiblePolicy::kRetry: return "retry";
    case InfeasiblePolicy::kAbort: return "abort";
  }
  return "?";
}

InfeasiblePolicy parse_infeasible_policy(std::string_view s) {
  if (s == "continue") return InfeasiblePolicy::kContinue;
  if (s == "retry") return InfeasiblePolicy::kRetry;
  if (s == "abort") return InfeasiblePolicy::kAbort;
  throw std::invalid_argument("unknown infeasible policy '" + std::string(s) + "'");
}

void SampleConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (length < 1) throw std::invalid_argument("length must be >= 1");
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  if (project_every < 1 || project_every > steps) throw std::invalid_argument("project_every must be in [1, steps]");
  if (project_start < 0 || project_start >= steps) throw std::invalid_argument("project_start must be in [0, steps)");
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw std::invalid_argument("smoothing must be in [0, 1)");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  alm.validate();
}

Sampler::Sampler(NoiseKernel kernel, const Denoiser& denoiser, SampleConfig cfg)
    : kernel_(std::move(kernel)), denoiser_(denoiser), cfg_(std::move(cfg)), schedule_(cfg_.schedule, cfg_.steps) {
  cfg_.validate();
  if (auto mask = kernel_.mask_id()) {
    auto& frozen = cfg_.alm.frozen_tokens;
    if (std::find(frozen.begin(), frozen.end(), *mask) == frozen.end()) frozen.push_back(*mask);
  }
}

namespace {

double seq_violation(const ConstraintSet* cs, const NoveltyDb* db, const Sequence& s) {
  if (db) return db->contains(s) ? 1.0 : 0.0;
  if (cs) return std::max(0.0, max_hard_violation(*cs, s));
  return 0.0;
}

// (1 - beta) * state + beta * (denoised + uniform over real tokens) / 2.
SeqDist smooth(const SeqDist& x, const SeqDist& den, double beta, std::optional<TokenId> mask) {
  if (beta == 0.0) return x;
  const std::size_t n = x.vocab_size();
  const double real = static_cast<double>(mask ? n - 1 : n);
  std::vector<double> out(x.values().size());
  for (std::size_t i = 0; i < x.length(); ++i) {
    for (TokenId v = 0; v < n; ++v) {
      const double flat = (mask && v == *mask) ? 0.0 : 1.0 / real;
      const double q = 0.5 * den(i, v) + 0.5 * flat;
      out[i * n + v] = (1.0 - beta) * x(i, v) + beta * q;
    }
  }
  return SeqDist::normalized(x.length(), n, std::move(out));
}

}  // namespace

Sampler::Sample Sampler::run_one(std::size_t index, const ConstraintSet* cs, NoveltyDb* db) const {
  using Clock = std::chrono::steady_clock;
  const std::size_t len = cfg_.length;
  const std::size_t n = kernel_.vocab_size();
  const int T = cfg_.steps;

  SeqDist x = SeqDist::uniform(len, n);
  if (auto mask = kernel_.mask_id()) {
    x = SeqDist::one_hot(Sequence(std::vector<TokenId>(len, *mask)), n);
  } else {
    Rng rng(derive_seed(cfg_.seed, {index, 0}));
    std::vector<TokenId> ids(len);
    for (auto& id : ids) id = sample_categorical(kernel_.reference(), rng);
    x = SeqDist::one_hot(Sequence(std::move(ids)), n);
  }

  Sample out;
  std::optional<Multipliers> warm;
  for (int k = 1; k <= T; ++k) {
    const auto started = Clock::now();
    const int t = T - k + 1;
    const double a_t = alpha(schedule_, t);
    const double a_s = alpha(schedule_, t - 1);
    const SeqDist den = denoiser_.denoise(x, a_t, kernel_);
    const bool last = k == T;
    const bool scheduled = cfg_.projection != ProjectionMode::kNone &&
                           (last || (k > cfg_.project_start && k % cfg_.project_every == 0));

    TraceRecord rec;
    rec.sample = index;
    rec.step = k;
    rec.t = t - 1;
    rec.projected = scheduled;
    SeqDist next = x;
    for (int attempt = 0;; ++attempt) {
      next = reverse_step(kernel_, x, den, a_t, a_s, derive_seed(cfg_.seed, {index, static_cast<std::uint64_t>(k),
                                                                             static_cast<std::uint64_t>(attempt)}));
      const Sequence drawn = decode(next);
      rec.violation_before = seq_violation(cs, db, drawn);
      rec.kl_moved = 0.0;
      rec.outer_iters = 0;
      rec.retries = attempt;
      if (!scheduled) {
        rec.violation_after = rec.violation_before;
        break;
      }

      const SeqDist x_in = smooth(next, den, cfg_.smoothing, kernel_.mask_id());
      SeqDist projected = x_in;
      if (rec.violation_before > cfg_.alm.delta) {
        if (cfg_.projection == ProjectionMode::kAlm) {
          AlmConfig alm = cfg_.alm;
          alm.relax.seed = derive_seed(cfg_.seed, {index, static_cast<std::uint64_t>(k),
                                                   static_cast<std::uint64_t>(attempt), 1});
          const AlmResult res = alm_project(x_in, *cs, alm, cfg_.warm_start && warm ? &*warm : nullptr);
          if (cfg_.warm_start) warm = res.multipliers;
          projected = res.projected;
          rec.kl_moved = res.kl_moved;
          rec.outer_iters = res.outer_iters;
        } else if (cfg_.projection == ProjectionMode::kPositional) {
          for (const auto& c : *cs) {
            const auto& p = static_cast<const Position&>(*c);
            projected = position_project(projected, p.position(), p.token());
          }
          rec.kl_moved = kl_divergence(x_in, projected);
        } else {
          const NoveltyResult res = novelty_project(x_in, *db, false, cfg_.alm.frozen_tokens);
          projected = res.projected;
          rec.kl_moved = kl_divergence(x_in, projected);
        }
      }
      const Sequence settled = decode(projected);
      next = SeqDist::one_hot(settled, n);
      rec.violation_after = seq_violation(cs, db, settled);
      rec.feasible = rec.violation_after <= cfg_.alm.delta;
      if (rec.feasible) break;

      if (cfg_.infeasible_policy == InfeasiblePolicy::kAbort) {
        throw InfeasibleError("sample " + std::to_string(index) + ": projection infeasible at step " +
                              std::to_string(k));
      }
      if (cfg_.infeasible_policy == InfeasiblePolicy::kRetry) {
        if (attempt + 1 < kMaxRetries) continue;
        if (last) {
          throw InfeasibleError("sample " + std::to_string(index) + ": final projection infeasible after " +
                                std::to_string(kMaxRetries) + " attempts");
        }
      }
      break;
    }
    x = std::move(next);
    if (cfg_.trace_timing) rec.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    if (cfg_.trace) out.trace.push_back(rec);
  }

  out.seq = decode(x);
  out.feasible = seq_violation(cs, db, out.seq) <= cfg_.alm.delta;
  if (db && out.feasible) db->insert(out.seq);
  return out;
}

SampleRun Sampler::run(const ConstraintSet* cs, NoveltyDb* db) const {
  switch (cfg_.projection) {
    case ProjectionMode::kAlm:
      if (!cs) throw std::invalid_argument("alm projection needs a constraint set");
      break;
    case ProjectionMode::kPositional:
      if (!cs) throw std::invalid_argument("positional projection needs a constraint set");
      for (const auto& c : *cs) {
        if (!dynamic_cast<const Position*>(c.get())) {
          throw std::invalid_argument("positional projection only supports position constraints");
        }
      }
      break;
    case ProjectionMode::kNovelty:
      if (!db) throw std::invalid_argument("novelty projection needs a database");
      break;
    case ProjectionMode::kNone:
      break;
  }
  const NoveltyDb* novelty = cfg_.projection == ProjectionMode::kNovelty ? db : nullptr;
  const ConstraintSet* constraints = novelty ? nullptr : cs;

  std::vector<Sample> samples(cfg_.num_samples);
  const unsigned workers = novelty ? 1u : std::min<unsigned>(cfg_.threads, cfg_.num_samples);
  if (workers <= 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = run_one(i, constraints, novelty ? db : nullptr);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(samples.size());
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < samples.size(); i = next++) {
          try {
            samples[i] = run_one(i, constraints, nullptr);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  SampleRun run;
  for (auto& s : samples) {
    run.sequences.push_back(std::move(s.seq));
    run.feasible.push_back(s.feasible);
    run.trace.insert(run.trace.end(), s.trace.begin(), s.trace.end());
  }
  return run;
}

SampleRun sample_constrained(const Corpus& corpus, const Vocabulary& vocab, const ConstraintSet& cs,
                             const SampleConfig& cfg) {
  if (corpus.length() != cfg.length) throw std::invalid_argument("corpus length differs from the configured length");
  ExactDenoiser den(std::make_shared<const Corpus>(corpus), vocab.size());
  Sampler sampler(NoiseKernel::for_vocabulary(cfg.kernel, vocab), den, cfg);
  return sampler.run(&cs);
}

SampleRun sample_novel(const Corpus& corpus, const Vocabulary& vocab, NoveltyDb& db, const SampleConfig& cfg) {
  if (corpus.length() != cfg.length) throw std::invalid_argument("corpus length differs from the configured length");
  ExactDenoiser den(std::make_shared<const Corpus>(corpus), vocab.size());
  SampleConfig c = cfg;
  c.projection = ProjectionMode::kNovelty;
  Sampler sampler(NoiseKernel::for_vocabulary(c.kernel, vocab), den, c);
  return sampler.run(nullptr, &db);
}

std::vector<Sequence> sample_unconstrained(const Corpus& corpus, const Vocabulary& vocab, const SampleConfig& cfg) {
  if (corpus.length() != cfg.length) throw std::invalid_argument("corpus length differs from the configured length");
  ExactDenoiser den(std::make_shared<const Corpus>(corpus), vocab.size());
  SampleConfig c = cfg;
  c.projection = ProjectionMode::kNone;
  Sampler sampler(NoiseKernel::for_vocabulary(c.kernel, vocab), den, c);
  return sampler.run().sequences;
}

}  // namespace cdiff
