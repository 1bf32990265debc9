// Copyright 2026 The progbnn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "doctest.h"
#include "json.hpp"
#include "progbnn/numerics.hpp"

using namespace progbnn;
using namespace progbnn::cli;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "progbnn");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() / ("progbnn_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> smoke_args(const fs::path& out) {
  return {"train", "--config", "synthetic_smoke", "--set", "epochs=4", "--set", "n_tasks=2",
          "--set", "finetune_epochs=1", "--out", out.string(), "--deterministic", "--quiet"};
}

// Accuracy values of the CSV rows with after_task == l (1-based).
std::vector<std::string> matrix_row(const std::string& csv, int l) {
  std::vector<std::string> values;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string after, task, acc;
    std::getline(fields, after, ',');
    std::getline(fields, task, ',');
    std::getline(fields, acc, ',');
    if (std::stoi(after) == l) values.push_back(acc);
  }
  return values;
}

}  // namespace

TEST_CASE("every preset survives serialize then parse") {
  for (const auto& name : preset_names()) {
    RunConfig c = preset(name);
    CHECK(same_config(parse_config(serialize_config(c)), c));
    CHECK(serialize_config(parse_config(serialize_config(c))) == serialize_config(c));
  }
}

TEST_CASE("random configs round-trip through the text format") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    RunConfig c = preset(preset_names()[rng.uniform_index(4)]);
    c.scenario.beta = std::exp(-10.0 * rng.uniform());
    c.scenario.gamma = rng.uniform();
    c.scenario.kappa = 100.0 * rng.uniform();
    c.scenario.optimizer.lr = 0.1 * rng.uniform() + 1e-6;
    c.scenario.init.rho_init = -10.0 * rng.uniform();
    c.scenario.initial_hidden = {1 + rng.uniform_index(300), 1 + rng.uniform_index(300), 1 + rng.uniform_index(9)};
    if (rng.uniform() < 0.5) c.scenario.alpha_req = {rng.uniform_index(50), rng.uniform_index(50), rng.uniform_index(5)};
    if (rng.uniform() < 0.5) c.scenario.replay_epochs = rng.uniform_index(100);
    c.scenario.pruning_enabled = rng.uniform() < 0.5;
    c.scenario.growth_policy = static_cast<GrowthPolicy>(rng.uniform_index(3));
    c.scenario.seed = rng.next_u64();
    c.stream.synthetic_sigma = rng.uniform();
    CHECK(same_config(parse_config(serialize_config(c)), c));
  }
}

TEST_CASE("config parsing names unknown keys and bad values") {
  CHECK_THROWS_WITH_AS(parse_config("bogus_key = 3\n"), doctest::Contains("bogus_key"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("epochs = many\n"), doctest::Contains("epochs"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("head_mode = three_heads\n"), doctest::Contains("head_mode"), ConfigError);
  CHECK_THROWS_AS(parse_config("just some words\n"), ConfigError);
  RunConfig c = parse_config("# comment\n\nepochs = 3  # trailing\nbeta=0.5\n");
  CHECK(c.scenario.epochs == 3);
  CHECK(c.scenario.beta == 0.5);
}

TEST_CASE("overrides win over file values") {
  TempDir dir;
  const fs::path file = dir.path / "run.cfg";
  std::ofstream(file) << serialize_config(preset("mh_smnist")) << "epochs = 3\n";
  RunConfig c = resolve_config(file.string(), {"epochs=7"});
  CHECK(c.scenario.epochs == 7);
  CHECK(c.scenario.coreset_size_per_task == 40);
}

TEST_CASE("the ablation flags map to a fixed architecture without pruning") {
  RunConfig c = resolve_config("ta_smnist", {"growth_policy=None", "pruning_enabled=false"});
  CHECK(c.scenario.growth_policy == GrowthPolicy::None);
  CHECK_FALSE(c.scenario.pruning_enabled);
  CHECK(c.scenario.beta == doctest::Approx(std::exp(-2.5)));
  RunConfig a = resolve_config("ta_smnist", {"growth_policy=None"});
  CHECK(a.scenario.pruning_enabled);
}

TEST_CASE("presets carry the published hyperparameters") {
  RunConfig mh = preset("mh_smnist");
  CHECK(mh.scenario.head_mode == HeadMode::MultiHead);
  CHECK(mh.scenario.beta == doctest::Approx(std::exp(-5.0)));
  CHECK(mh.scenario.gamma == 0.2);
  CHECK(mh.scenario.coreset_size_per_task == 40);
  RunConfig ta = preset("ta_smnist");
  CHECK(ta.scenario.head_mode == HeadMode::SingleHead);
  CHECK(ta.scenario.gamma == 0.1);
  CHECK(ta.scenario.coreset_size_per_task == 20);
  RunConfig pm = preset("pmnist");
  CHECK(pm.stream.kind == StreamKind::PermutedMnist);
  CHECK(pm.scenario.coreset_size_per_task == 200);
  CHECK(pm.scenario.gamma == 0.12);
  CHECK_THROWS_AS(preset("cifar"), ConfigError);
}

TEST_CASE("unknown override keys fail cleanly with the key in the message") {
  TempDir dir;
  CliResult r = run({"train", "--config", "synthetic_smoke", "--set", "not_a_key=1", "--out", dir.path.string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("not_a_key") != std::string::npos);
}

TEST_CASE("a missing config file fails cleanly") {
  TempDir dir;
  CliResult r = run({"train", "--config", (dir.path / "absent.cfg").string(), "--out", dir.path.string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("presets subcommand lists and prints presets") {
  CliResult list = run({"presets"});
  CHECK(list.code == 0);
  CHECK(list.out.find("ta_smnist") != std::string::npos);
  CliResult one = run({"presets", "pmnist"});
  CHECK(one.code == 0);
  CHECK(one.out.find("coreset_size_per_task = 200") != std::string::npos);
  CHECK(run({"presets", "nope"}).code != 0);
}

TEST_CASE("train writes a complete run directory and evaluate reproduces it") {
  TempDir dir;
  CliResult r = run(smoke_args(dir.path));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("seed 0: accuracy") != std::string::npos);
  CHECK(r.out.find("Accuracy: ") != std::string::npos);

  const fs::path seed_dir = dir.path / "seed_0";
  for (const char* name : {"summary.json", "accuracy_matrix.csv", "growth.csv", "prune.csv", "adaptation_stats.csv",
                           "config.txt", "checkpoint_task_1", "checkpoint_task_2"})
    CHECK_MESSAGE(fs::exists(seed_dir / name), name);
  CHECK(read_file(seed_dir / "growth.csv").rfind("task,layer,alpha_req,alpha_share,alpha_prune,alpha,width_after\n", 0) == 0);
  CHECK(read_file(seed_dir / "adaptation_stats.csv").rfind("task,layer,bin,mean_abs_delta_mu_log10\n", 0) == 0);

  const auto manifest = nlohmann::json::parse(read_file(dir.path / "manifest.json"));
  CHECK(manifest["completed"] == true);
  CHECK(manifest["version"].get<std::string>().rfind("0.1.0", 0) == 0);
  std::size_t listed = 0;
  for (const auto& a : manifest["artifacts"]) {
    CHECK(fs::exists(a.get<std::string>()));
    ++listed;
  }
  std::size_t on_disk = 0;
  for (const auto& e : fs::directory_iterator(seed_dir)) on_disk += e.is_regular_file();
  CHECK(listed == on_disk);

  const auto summary = nlohmann::json::parse(read_file(seed_dir / "summary.json"));
  CHECK(summary["accuracy_matrix"].size() == 2);

  const std::string csv = read_file(seed_dir / "accuracy_matrix.csv");
  CliResult eval = run({"evaluate", (seed_dir / "checkpoint_task_2").string(), "--config", "synthetic_smoke", "--set",
                        "n_tasks=2", "--set", "finetune_epochs=1", "--set", "epochs=4"});
  REQUIRE_MESSAGE(eval.code == 0, eval.err);
  const auto row = matrix_row(csv, 2);
  REQUIRE(row.size() == 2);
  CHECK(eval.out.find("task 1: " + row[0] + "\n") != std::string::npos);
  CHECK(eval.out.find("task 2: " + row[1] + "\n") != std::string::npos);

  CliResult first = run({"evaluate", (seed_dir / "checkpoint_task_1").string(), "--config", "synthetic_smoke", "--set",
                         "n_tasks=2", "--set", "finetune_epochs=1"});
  REQUIRE(first.code == 0);
  const auto row1 = matrix_row(csv, 1);
  CHECK(first.out == "task 1: " + row1[0] + "\naverage: " + row1[0] + "\n");

  CliResult mismatch = run({"evaluate", (seed_dir / "checkpoint_task_2").string(), "--config", "synthetic_smoke",
                            "--set", "n_tasks=2", "--set", "head_mode=single_head"});
  CHECK(mismatch.code != 0);
  CliResult too_few = run({"evaluate", (seed_dir / "checkpoint_task_2").string(), "--config", "synthetic_smoke",
                           "--set", "n_tasks=1"});
  CHECK(too_few.code != 0);

  CliResult stats = run({"stats", seed_dir.string(), "--out", (dir.path / "stats.csv").string()});
  REQUIRE_MESSAGE(stats.code == 0, stats.err);
  CHECK(read_file(dir.path / "stats.csv").rfind("task,layer,bin,mean_abs_delta_mu_log10\n", 0) == 0);
  CHECK(stats.out.find("task,layer,significant_fraction") != std::string::npos);
}

TEST_CASE("evaluate rejects a corrupt checkpoint") {
  TempDir dir;
  std::ofstream(dir.path / "checkpoint_task_1") << "not a checkpoint";
  CliResult r = run({"evaluate", (dir.path / "checkpoint_task_1").string(), "--config", "synthetic_smoke"});
  CHECK(r.code != 0);
  CHECK(r.err.find("checkpoint") != std::string::npos);
}

TEST_CASE("stats needs at least two checkpoints") {
  TempDir dir;
  CliResult r = run(smoke_args(dir.path));
  REQUIRE(r.code == 0);
  fs::remove(dir.path / "seed_0" / "checkpoint_task_2");
  CliResult stats = run({"stats", (dir.path / "seed_0").string()});
  CHECK(stats.code != 0);
  CHECK(stats.err.find("two checkpoint") != std::string::npos);
}

TEST_CASE("identical checkpoints give zero-adaptation rows") {
  TempDir dir;
  REQUIRE(run(smoke_args(dir.path)).code == 0);
  const fs::path ckpts = dir.path / "same";
  fs::create_directories(ckpts);
  fs::copy_file(dir.path / "seed_0" / "checkpoint_task_2", ckpts / "checkpoint_task_1");
  fs::copy_file(dir.path / "seed_0" / "checkpoint_task_2", ckpts / "checkpoint_task_2");
  REQUIRE(run({"stats", ckpts.string()}).code == 0);
  std::istringstream csv(read_file(ckpts / "adaptation_stats.csv"));
  std::string line;
  std::getline(csv, line);
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const std::string value = line.substr(line.rfind(',') + 1);
    CHECK((value == "-inf" || value == "nan"));
  }
  CHECK(rows == 6);
}

TEST_CASE("deterministic runs write byte-identical accuracy matrices") {
  TempDir a, b;
  REQUIRE(run(smoke_args(a.path)).code == 0);
  REQUIRE(run(smoke_args(b.path)).code == 0);
  CHECK(read_file(a.path / "seed_0" / "accuracy_matrix.csv") == read_file(b.path / "seed_0" / "accuracy_matrix.csv"));
}

TEST_CASE("multiple seeds run in parallel and report mean and spread") {
  TempDir dir;
  std::vector<std::string> args = smoke_args(dir.path);
  args.erase(std::find(args.begin(), args.end(), "--deterministic"));
  args.insert(args.end(), {"--seeds", "2", "--set", "deterministic=false"});
  CliResult r = run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir.path / "seed_0" / "summary.json"));
  CHECK(fs::exists(dir.path / "seed_1" / "summary.json"));
  CHECK(r.out.find("over 2 seed(s)") != std::string::npos);
}
