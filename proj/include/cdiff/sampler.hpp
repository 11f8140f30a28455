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
#include <stdexcept>
#include <string_view>
#include <vector>

#include "cdiff/constraint.hpp"
#include "cdiff/core.hpp"
#include "cdiff/denoiser.hpp"
#include "cdiff/kernel.hpp"
#include "cdiff/projection.hpp"

namespace cdiff {

enum class ProjectionMode { kAlm, kNovelty, kPositional, kNone };
enum class InfeasiblePolicy { kContinue, kRetry, kAbort };

std::string_view to_string(ProjectionMode m);
ProjectionMode parse_projection_mode(std::string_view s);
std::string_view to_string(InfeasiblePolicy p);
InfeasiblePolicy parse_infeasible_policy(std::string_view s);

struct SampleConfig {
  int steps = 32;
  KernelKind kernel = KernelKind::kMasked;
  ScheduleKind schedule = ScheduleKind::kLinear;
  std::size_t length = 8;
  std::size_t num_samples = 100;
  std::uint64_t seed = 0;
  ProjectionMode projection = ProjectionMode::kAlm;
  /// Steps are numbered k = 1..T in denoising order. Projection runs when
  /// k > project_start and k % project_every == 0, and always at k = T.
  int project_every = 1;
  int project_start = 0;
  InfeasiblePolicy infeasible_policy = InfeasiblePolicy::kRetry;
  AlmConfig alm;
  /// Weight beta of the denoiser/uniform mixture blended into the one-hot
  /// state before projection, so that relaxed gradients do not vanish.
  double smoothing = 0.05;
  /// Carry ALM multipliers from one projected step to the next.
  bool warm_start = false;
  bool trace = true;
  /// Record wall time per step. Off by default so outputs are reproducible.
  bool trace_timing = false;
  unsigned threads = 1;

  void validate() const;
};

/// Re-draws per step under the retry policy.
inline constexpr int kMaxRetries = 5;

struct TraceRecord {
  std::size_t sample = 0;
  int step = 0;  // k, 1-based
  int t = 0;     // level after the step
  bool projected = false;
  double violation_before = 0.0;
  double violation_after = 0.0;
  double kl_moved = 0.0;
  int outer_iters = 0;
  int retries = 0;
  bool feasible = true;
  double wall_seconds = 0.0;
};

struct SampleRun {
  std::vector<Sequence> sequences;
  /// Per sample: final decoded sequence satisfies the constraints.
  std::vector<bool> feasible;
  std::vector<TraceRecord> trace;
};

struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Sampler {
 public:
  /// In kPositional mode every constraint must be a Position. kNovelty needs
  /// a db passed to run(); kAlm and kPositional need a constraint set.
  Sampler(NoiseKernel kernel, const Denoiser& denoiser, SampleConfig cfg);

  /// Throws InfeasibleError when the policy gives up (abort on any failed
  /// projection, retry on a final step that stays infeasible).
  SampleRun run(const ConstraintSet* cs = nullptr, NoveltyDb* db = nullptr) const;

  const SampleConfig& config() const { return cfg_; }

 private:
  struct Sample {
    Sequence seq;
    bool feasible = true;
    std::vector<TraceRecord> trace;
  };
  Sample run_one(std::size_t index, const ConstraintSet* cs, NoveltyDb* db) const;

  NoiseKernel kernel_;
  const Denoiser& denoiser_;
  SampleConfig cfg_;
  Schedule schedule_;
};

/// Exact-denoiser constrained sampling over a corpus.
SampleRun sample_constrained(const Corpus& corpus, const Vocabulary& vocab, const ConstraintSet& cs,
                             const SampleConfig& cfg);
/// Novelty mode: every output avoids db (seeded by the caller, usually with
/// the corpus) and is added to it.
SampleRun sample_novel(const Corpus& corpus, const Vocabulary& vocab, NoveltyDb& db, const SampleConfig& cfg);
std::vector<Sequence> sample_unconstrained(const Corpus& corpus, const Vocabulary& vocab, const SampleConfig& cfg);

}  // namespace cdiff
