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

// Continual learning driver: per-task variational training with the previous
// posterior as prior, coreset rehearsal, and the prune/grow/expand pipeline
// run at every task boundary.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "progbnn/bnn.hpp"
#include "progbnn/data.hpp"
#include "progbnn/plasticity.hpp"

namespace progbnn {

struct ScenarioConfig {
  HeadMode head_mode = HeadMode::MultiHead;
  GrowthPolicy growth_policy = GrowthPolicy::ResourceAccounting;
  bool pruning_enabled = true;
  double beta = 0.006737946999085467;  // e^-5
  double gamma = 0.2;
  double kappa = 1.0;
  std::size_t coreset_size_per_task = 40;

  std::vector<std::size_t> initial_hidden{64, 64};
  /// Required neurons per layer for each new task; empty means initial_hidden.
  std::vector<std::size_t> alpha_req;

  InitSettings init;
  OptimizerSettings optimizer;
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  std::size_t mc_train = 1;
  std::size_t mc_eval = 10;
  /// Epochs of coreset replay; unset means `epochs`.
  std::optional<std::size_t> replay_epochs;
  /// Epochs of per-task coreset fine-tuning at multi-head evaluation.
  std::size_t finetune_epochs = 5;

  std::uint64_t seed = 0;
  bool deterministic = true;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  std::size_t effective_replay_epochs() const { return replay_epochs.value_or(epochs); }
  std::vector<std::size_t> effective_alpha_req() const;
};

/// Retained random subsets of each task's training data.
struct CoresetTask {
  int task = 0;
  std::size_t quota = 0;
  LabeledDataset samples;
  /// Row indices of `samples` in the task's original training split.
  std::vector<std::size_t> source_indices;

  friend bool operator==(const CoresetTask&, const CoresetTask&) = default;
};

class Coreset {
 public:
  void add(CoresetTask entry);
  bool empty() const;
  std::size_t size() const;
  const std::vector<CoresetTask>& tasks() const { return tasks_; }
  const CoresetTask* find(int task) const;
  LabeledDataset union_all() const;

  friend bool operator==(const Coreset&, const Coreset&) = default;

 private:
  std::vector<CoresetTask> tasks_;
};

struct CoresetSplit {
  CoresetTask coreset;
  LabeledDataset remainder;  // D_t \ CT_t
};

/// Draws `quota` samples uniformly without replacement; the rest form the
/// training split.
CoresetSplit split_coreset(const LabeledDataset& train, int task, std::size_t quota, Rng& rng);

/// A[l][t]: accuracy on task t after training through task l (both 0-based).
class AccuracyMatrix {
 public:
  /// Row l must hold l + 1 entries in [0, 1].
  void add_row(std::vector<double> row);
  std::size_t tasks_trained() const { return rows_.size(); }
  double at(std::size_t l, std::size_t t) const;
  const std::vector<double>& row(std::size_t l) const { return rows_.at(l); }
  /// (1 / (l + 1)) * sum_t A[l][t].
  double average(std::size_t l) const;
  double final_average() const;

  /// Columns: after_task,task,accuracy (1-based task numbers).
  void write_csv(std::ostream& out) const;

  friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

 private:
  std::vector<std::vector<double>> rows_;
};

/// Mean of the per-task accuracies of one evaluation row.
double average_accuracy(std::span<const double> row);

struct ForgettingCurves {
  /// series[t][j] = A[t + j][t].
  std::vector<std::vector<double>> series;
  /// A[t][t] - A[last][t].
  std::vector<double> forgetting;
};

ForgettingCurves forgetting_curves(const AccuracyMatrix& matrix);

using LogSink = std::function<void(std::string_view)>;

/// Minibatch ELBO optimization of `net` on `data` against `prior`, using the
/// head `head`. kl_scale = 1 / batches per epoch. Returns the posterior
/// snapshot tagged with `task`.
PosteriorSnapshot train_task(VariationalNetwork& net, const PosteriorSnapshot& prior,
                             const LabeledDataset& data, int head, int task,
                             const ScenarioConfig& config, std::size_t epochs, Rng& rng);

enum class ReplayScope { AllTasks, OneTask };

/// Trains a copy of `net` on the coreset union (AllTasks, shared head) or on
/// one task's coreset with that task's head (OneTask). Throws when the
/// requested scope holds no samples.
VariationalNetwork replay_coreset(const VariationalNetwork& net, const PosteriorSnapshot& prior,
                                  const Coreset& coreset, const ScenarioConfig& config,
                                  ReplayScope scope, int task, Rng& rng);

/// Per-task accuracy after training through `tasks_seen` tasks. Multi-head
/// fine-tunes a clone on each task's coreset before predicting; prediction is
/// the argmax of MC-averaged softmax probabilities.
std::vector<double> evaluate(const VariationalNetwork& net, const TaskStream& stream,
                             std::size_t tasks_seen, const Coreset& coreset,
                             const ScenarioConfig& config);

/// Fraction of correct argmax predictions.
double accuracy(const VariationalNetwork& net, const LabeledDataset& data, int head,
                std::size_t mc_samples, Rng& rng);

struct TaskRecord {
  int task = 0;
  PruneReport prune;
  GrowthPlan growth;
  std::vector<std::size_t> hidden_after;
  double phi_d = 0.0;
  double phi_s = 0.0;
};

struct RunResult {
  AccuracyMatrix accuracy;
  std::vector<TaskRecord> records;  // one per task boundary (tasks 2..l)
  std::vector<PosteriorSnapshot> snapshots;  // one per task
  VariationalNetwork final_net;
  Coreset coreset;
};

struct RunHooks {
  LogSink log;
  /// Called after each task's pipeline and evaluation with the 0-based task index.
  std::function<void(int task, const VariationalNetwork&, const Coreset&, const AccuracyMatrix&)> on_task_end;
};

/// Runs the full continual pipeline over `stream`.
RunResult run_continual(const TaskStream& stream, const ScenarioConfig& config, const RunHooks& hooks = {});

// Checkpoint file: magic "PBNNCKPT", u64 tasks_trained, u64 seed, then a
// network record (see write_network), then the coreset: u64 n_tasks and per
// task: i64 task, u64 quota, u64 rows, u64 dim, rows*dim binary64 inputs,
// rows i64 labels, rows u64 source indices. Integers are little-endian.
struct Checkpoint {
  std::size_t tasks_trained = 0;
  std::uint64_t seed = 0;
  VariationalNetwork net;
  Coreset coreset;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace progbnn
