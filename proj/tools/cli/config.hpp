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

// Flat `key = value` run configuration. One key per line, `#` starts a
// comment. Keys mirror ScenarioConfig plus the task-stream settings:
//
//   head_mode             multi_head | single_head
//   growth_policy         ResourceAccounting | VipScaled | None
//   pruning_enabled       true | false
//   beta gamma kappa      reals
//   coreset_size_per_task count
//   initial_hidden        comma-separated widths, e.g. 64,64
//   alpha_req             comma-separated widths or "auto" (= initial_hidden)
//   mu_std rho_init prior_rho
//   optimizer             adam | sgd
//   lr adam_beta1 adam_beta2 adam_epsilon
//   epochs batch_size mc_train mc_eval finetune_epochs
//   replay_epochs         count or "auto" (= epochs)
//   seed deterministic
//   stream                split_mnist | permuted_mnist | synthetic
//   data_dir              directory with the four MNIST IDX files
//   n_tasks               permuted and synthetic streams
//   subsample_per_class   0 keeps every training sample
//   synthetic_classes_per_task synthetic_dim synthetic_separation
//   synthetic_sigma synthetic_n_per_class
//
// phi_s, the capacity term of the VipScaled policy, is read as the fraction
// of hidden weights pruned at the task boundary. The alternative reading
// (fraction of significant neurons) is not offered.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "progbnn/continual.hpp"
#include "progbnn/data.hpp"

namespace progbnn::cli {

enum class StreamKind { SplitMnist, PermutedMnist, Synthetic };

struct StreamConfig {
  StreamKind kind = StreamKind::SplitMnist;
  std::string data_dir;
  std::size_t n_tasks = 5;
  std::size_t subsample_per_class = 0;
  std::size_t synthetic_classes_per_task = 2;
  std::size_t synthetic_dim = 10;
  double synthetic_separation = 10.0;
  double synthetic_sigma = 1.0;
  std::size_t synthetic_n_per_class = 100;

  friend bool operator==(const StreamConfig&, const StreamConfig&) = default;
};

struct RunConfig {
  ScenarioConfig scenario;
  StreamConfig stream;
};

/// Thrown for unknown keys and malformed values; the message names the key.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

bool same_config(const RunConfig& a, const RunConfig& b);

std::vector<std::string> config_keys();
std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown preset.
RunConfig preset(const std::string& name);

/// Applies one `key = value` assignment.
void set_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_value(const RunConfig& config, const std::string& key);

/// Parses the text on top of `base`.
RunConfig parse_config(const std::string& text, RunConfig base = {});
std::string serialize_config(const RunConfig& config);

/// `name_or_path` is a preset name or a config file path. A file named like a
/// preset wins over the preset.
RunConfig load_config(const std::string& name_or_path);

/// Applies `KEY=VALUE` overrides in order.
void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides);

/// Compile-time default for data_dir, overridable with PROGBNN_DATA_DIR.
std::string default_data_dir();

TaskStream build_stream(const StreamConfig& stream, std::uint64_t seed);

}  // namespace progbnn::cli
