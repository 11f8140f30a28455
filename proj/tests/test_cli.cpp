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

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cdiff/cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kToy = fs::path(CDIFF_SOURCE_DIR) / "data" / "toy";

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("cdiff_cli_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& j) {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

json base_config(const fs::path& out) {
  return {{"vocab", (kToy / "vocab.txt").string()},
          {"corpus", (kToy / "corpus.txt").string()},
          {"output_dir", out.string()},
          {"seed", 3},
          {"sample", {{"steps", 16}, {"num_samples", 40}, {"threads", 1}}}};
}

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cdiff");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cdiff::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("sample without constraints writes all outputs") {
  TempDir tmp;
  json cfg = base_config(tmp.path / "run");
  cfg["sample"]["projection"] = "none";
  const auto path = write_config(tmp.path, "c.json", cfg);
  const Result r = run_cli({"sample", "--config", path.string()});
  REQUIRE_MESSAGE(r.code == cdiff::cli::kExitOk, r.err);
  CHECK(count_lines(slurp(tmp.path / "run" / "samples.txt")) == 40);
  const std::string trace = slurp(tmp.path / "run" / "trace.csv");
  CHECK(trace.rfind("sample,step,t,projected,violation_before,violation_after,kl_moved", 0) == 0);
  CHECK(count_lines(trace) == 1 + 16 * 40);
  const json m = json::parse(slurp(tmp.path / "run" / "metrics.json"));
  CHECK(m.at("n_samples") == 40);
  CHECK(m.at("mean_perplexity").get<double>() >= 1.0);
}

TEST_CASE("toxicity threshold is met by every sample and runs are reproducible") {
  TempDir tmp;
  json cfg = base_config(tmp.path / "a");
  cfg["constraints"] = (kToy / "constraints" / "toxicity_025.json").string();
  const auto path = write_config(tmp.path, "c.json", cfg);
  const Result a = run_cli({"sample", "--config", path.string()});
  REQUIRE_MESSAGE(a.code == cdiff::cli::kExitOk, a.err);
  CHECK(json::parse(slurp(tmp.path / "a" / "metrics.json")).at("violation_rate") == 0.0);

  const Result b = run_cli({"sample", "--config", path.string(), "--out", (tmp.path / "b").string()});
  REQUIRE(b.code == cdiff::cli::kExitOk);
  CHECK(slurp(tmp.path / "a" / "samples.txt") == slurp(tmp.path / "b" / "samples.txt"));

  const Result c = run_cli({"sample", "--config", path.string(), "--seed", "99", "--out", (tmp.path / "c").string()});
  REQUIRE(c.code == cdiff::cli::kExitOk);
  CHECK(slurp(tmp.path / "a" / "samples.txt") != slurp(tmp.path / "c" / "samples.txt"));
}

TEST_CASE("eval recomputes the metrics of a samples file") {
  TempDir tmp;
  json cfg = base_config(tmp.path / "run");
  cfg["constraints"] = (kToy / "constraints" / "forbidden.json").string();
  const auto path = write_config(tmp.path, "c.json", cfg);
  REQUIRE(run_cli({"sample", "--config", path.string()}).code == 0);
  const std::string sampled = slurp(tmp.path / "run" / "metrics.json");
  const Result e = run_cli({"eval", "--config", path.string(), "--out", (tmp.path / "eval").string(), "--samples",
                            (tmp.path / "run" / "samples.txt").string()});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  CHECK(e.out == sampled);
}

TEST_CASE("oracle-check passes and the corrupted denoiser is caught") {
  TempDir tmp;
  json cfg = base_config(tmp.path / "run");
  cfg["oracle_check"] = {{"denoiser_cases", 20}, {"projection_cases", 5}, {"position_cases", 20},
                         {"novelty_cases", 20}};
  const auto path = write_config(tmp.path, "c.json", cfg);
  const Result ok = run_cli({"oracle-check", "--config", path.string()});
  CHECK_MESSAGE(ok.code == cdiff::cli::kExitOk, ok.out);
  CHECK(ok.out.find("FAIL") == std::string::npos);

  const Result bad = run_cli({"oracle-check", "--config", path.string(), "--corrupt-denoiser"});
  CHECK(bad.code == cdiff::cli::kExitUsage);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("oracle-check rejects oversized instances") {
  TempDir tmp;
  json cfg = base_config(tmp.path / "run");
  cfg["oracle_check"] = {{"novelty_max_space", 1 << 20}};
  const auto path = write_config(tmp.path, "c.json", cfg);
  CHECK(run_cli({"oracle-check", "--config", path.string()}).code == cdiff::cli::kExitUsage);
}

TEST_CASE("ablate writes one row per grid cell") {
  TempDir tmp;
  json cfg = base_config(tmp.path / "run");
  cfg["constraints"] = (kToy / "constraints" / "toxicity_05.json").string();
  cfg["sample"]["num_samples"] = 10;
  cfg["ablation"] = {{"eta", {0.2, 0.4}}, {"mu_init", {1, 5}}};
  const auto path = write_config(tmp.path, "c.json", cfg);
  const Result r = run_cli({"ablate", "--config", path.string()});
  REQUIRE_MESSAGE(r.code == cdiff::cli::kExitOk, r.err);
  const std::string csv = slurp(tmp.path / "run" / "ablation.csv");
  CHECK(count_lines(csv) == 1 + 4);
  CHECK(csv.find(",ok,0,") != std::string::npos);

  cfg["ablation"] = json::object();
  const auto empty = write_config(tmp.path, "e.json", cfg);
  CHECK(run_cli({"ablate", "--config", empty.string()}).code == cdiff::cli::kExitUsage);
}

TEST_CASE("usage and input errors exit with code 1") {
  TempDir tmp;
  CHECK(run_cli({}).code == cdiff::cli::kExitUsage);
  CHECK(run_cli({"sample"}).code == cdiff::cli::kExitUsage);
  CHECK(run_cli({"frobnicate", "--config", "x.json"}).code == cdiff::cli::kExitUsage);
  CHECK(run_cli({"sample", "--config", (tmp.path / "missing.json").string()}).code == cdiff::cli::kExitUsage);

  json cfg = base_config(tmp.path / "run");
  cfg["bogus"] = 1;
  CHECK(run_cli({"sample", "--config", write_config(tmp.path, "u.json", cfg).string()}).code ==
        cdiff::cli::kExitUsage);

  std::ofstream(tmp.path / "empty.txt") << "";
  cfg = base_config(tmp.path / "run");
  cfg["corpus"] = (tmp.path / "empty.txt").string();
  const Result r = run_cli({"sample", "--config", write_config(tmp.path, "e.json", cfg).string()});
  CHECK(r.code == cdiff::cli::kExitUsage);
  CHECK(r.err.find("empty") != std::string::npos);
}

TEST_CASE("shipped configs parse") {
  for (const char* name :
       {"toxicity_025.json", "unconstrained.json", "novelty.json", "ablation.json", "frequency.json",
        "oracle_check.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(cdiff::cli::load_run_config(kToy / "configs" / name));
  }
}
