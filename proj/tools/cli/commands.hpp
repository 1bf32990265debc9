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

#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"

namespace progbnn::cli {

struct TrainOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::size_t seeds = 1;
  std::string out_dir = "runs";
  bool deterministic = false;
  std::optional<std::size_t> subsample_per_class;
  bool quiet = false;
};

struct EvaluateOptions {
  std::string checkpoint;
  std::string config;
  std::vector<std::string> overrides;
};

struct StatsOptions {
  std::string checkpoint_dir;
  /// Defaults to <checkpoint_dir>/adaptation_stats.csv.
  std::string out_csv;
};

/// Seed i of a multi-seed run uses config.seed + i and writes to
/// <out_dir>/seed_<seed>/. A manifest.json at <out_dir> lists every artifact.
int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err);
int cmd_stats(const StatsOptions& options, std::ostream& out, std::ostream& err);

/// Resolves --config plus --set overrides, or throws ConfigError.
RunConfig resolve_config(const std::string& config, const std::vector<std::string>& overrides);

std::string version_string();

/// Entry point shared by the executable and the CLI tests.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace progbnn::cli
