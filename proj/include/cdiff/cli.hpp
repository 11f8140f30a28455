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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "cdiff/sampler.hpp"

namespace cdiff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInfeasible = 2;

/// Raised for malformed or inconsistent run configurations.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AblationGrid {
  std::vector<double> eta;
  std::vector<double> mu_init;
  std::vector<int> max_inner_iter;
  std::vector<int> project_every;
  std::vector<int> project_start;
  /// Runs per cell; the runtime column is their median.
  int repeats = 1;
};

struct OracleCheckOptions {
  int denoiser_cases = 200;
  int projection_cases = 50;
  int position_cases = 200;
  int novelty_cases = 200;
  std::size_t projection_max_length = 3;
  std::size_t projection_max_vocab = 4;
  std::size_t novelty_max_space = 4096;
  /// Test hook: perturbs the denoiser under test so its suite must fail.
  bool corrupt_denoiser = false;
};

/// Limits on oracle-check instance sizes; larger requests are rejected.
inline constexpr std::size_t kMaxOracleSpace = 4096;
inline constexpr std::size_t kMaxProjectionSpace = 256;
inline constexpr std::size_t kMaxOracleCorpus = 100'000;

struct RunConfig {
  std::filesystem::path vocab;
  std::filesystem::path corpus;
  /// Optional: empty means no constraints.
  std::filesystem::path constraints;
  std::filesystem::path output_dir;
  /// Input of `eval`; defaults to output_dir/samples.txt.
  std::filesystem::path samples;
  /// Sample length follows the corpus unless set explicitly.
  bool length_from_corpus = true;
  SampleConfig sample;
  double kappa = 1.0;
  std::optional<AblationGrid> ablation;
  OracleCheckOptions oracle;
};

/// Relative paths are resolved against base_dir. Unknown keys are errors.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Each command prints progress to `out`, errors to `err`, and returns an
/// exit code.
int cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_oracle_check(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_ablate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Full command line: `<prog> <command> --config <path> [--seed N] [--out DIR]`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cdiff::cli
