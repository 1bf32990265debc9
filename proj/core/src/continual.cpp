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

#include "progbnn/continual.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace progbnn {

namespace {

// Sub-stream ids of the run generator.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kCoresetStream = 100;
constexpr std::uint64_t kPlasticityStream = 200;
constexpr std::uint64_t kTrainStream = 300;
constexpr std::uint64_t kReplayStream = 400;
constexpr std::uint64_t kEvalStream = 10000;

constexpr std::size_t kEvalChunk = 512;

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw std::invalid_argument("config field '" + field + "' " + what);
}

void log_line(const LogSink& log, const std::string& line) {
  if (log) log(line);
}

std::string widths_string(const std::vector<std::size_t>& widths) {
  std::string s = "[";
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(widths[i]);
  }
  return s + "]";
}

}  // namespace

void ScenarioConfig::validate() const {
  require(std::isfinite(beta) && beta >= 0.0, "beta", "must be a finite non-negative number");
  require(std::isfinite(gamma) && gamma >= 0.0, "gamma", "must be a finite non-negative number");
  require(std::isfinite(kappa) && kappa >= 0.0, "kappa", "must be a finite non-negative number");
  require(!initial_hidden.empty(), "initial_hidden", "needs at least one layer");
  for (std::size_t w : initial_hidden) require(w > 0, "initial_hidden", "has a zero-width layer");
  require(alpha_req.empty() || alpha_req.size() == initial_hidden.size(), "alpha_req",
          "must have one entry per hidden layer");
  require(std::isfinite(init.mu_std) && init.mu_std >= 0.0, "mu_std", "must be finite and non-negative");
  require(std::isfinite(init.rho_init), "rho_init", "must be finite");
  require(std::isfinite(init.prior_rho), "prior_rho", "must be finite");
  require(std::isfinite(optimizer.lr) && optimizer.lr > 0.0, "lr", "must be positive");
  require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0, "adam_beta1", "must lie in [0, 1)");
  require(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0, "adam_beta2", "must lie in [0, 1)");
  require(optimizer.epsilon > 0.0, "adam_epsilon", "must be positive");
  require(batch_size > 0, "batch_size", "must be positive");
  require(mc_train > 0, "mc_train", "must be positive");
}

std::vector<std::size_t> ScenarioConfig::effective_alpha_req() const {
  return alpha_req.empty() ? initial_hidden : alpha_req;
}

void Coreset::add(CoresetTask entry) {
  if (find(entry.task) != nullptr)
    throw std::invalid_argument("coreset already holds task " + std::to_string(entry.task));
  for (const auto& t : tasks_)
    if (t.samples.size() > 0 && entry.samples.size() > 0 && t.samples.dim() != entry.samples.dim())
      throw std::invalid_argument("coreset entry width differs from existing entries");
  tasks_.push_back(std::move(entry));
}

bool Coreset::empty() const { return size() == 0; }

std::size_t Coreset::size() const {
  std::size_t n = 0;
  for (const auto& t : tasks_) n += t.samples.size();
  return n;
}

const CoresetTask* Coreset::find(int task) const {
  for (const auto& t : tasks_)
    if (t.task == task) return &t;
  return nullptr;
}

LabeledDataset Coreset::union_all() const {
  std::vector<LabeledDataset> parts;
  for (const auto& t : tasks_)
    if (t.samples.size() > 0) parts.push_back(t.samples);
  if (parts.empty()) return {};
  return concatenate(parts);
}

CoresetSplit split_coreset(const LabeledDataset& train, int task, std::size_t quota, Rng& rng) {
  if (quota > train.size())
    throw std::invalid_argument("coreset quota " + std::to_string(quota) + " exceeds task " +
                                std::to_string(task) + " training size " + std::to_string(train.size()));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(quota));
  std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(quota), order.end());
  std::sort(picked.begin(), picked.end());
  std::sort(rest.begin(), rest.end());

  CoresetSplit split;
  split.coreset.task = task;
  split.coreset.quota = quota;
  split.coreset.samples = train.subset(picked);
  split.coreset.source_indices = picked;
  split.remainder = train.subset(rest);
  return split;
}

void AccuracyMatrix::add_row(std::vector<double> row) {
  if (row.size() != rows_.size() + 1)
    throw std::invalid_argument("accuracy row " + std::to_string(rows_.size()) + " needs " +
                                std::to_string(rows_.size() + 1) + " entries, got " +
                                std::to_string(row.size()));
  for (double a : row)
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("accuracy outside [0, 1]");
  rows_.push_back(std::move(row));
}

double AccuracyMatrix::at(std::size_t l, std::size_t t) const {
  if (l >= rows_.size() || t > l)
    throw std::out_of_range("accuracy entry (" + std::to_string(l) + ", " + std::to_string(t) +
                            ") is not defined");
  return rows_[l][t];
}

double AccuracyMatrix::average(std::size_t l) const { return average_accuracy(rows_.at(l)); }

double AccuracyMatrix::final_average() const {
  if (rows_.empty()) throw std::logic_error("accuracy matrix is empty");
  return average(rows_.size() - 1);
}

void AccuracyMatrix::write_csv(std::ostream& out) const {
  out << "after_task,task,accuracy\n";
  char buf[64];
  for (std::size_t l = 0; l < rows_.size(); ++l) {
    for (std::size_t t = 0; t < rows_[l].size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%.6f", rows_[l][t]);
      out << (l + 1) << ',' << (t + 1) << ',' << buf << '\n';
    }
  }
}

double average_accuracy(std::span<const double> row) {
  if (row.empty()) throw std::invalid_argument("average_accuracy: empty row");
  return std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
}

ForgettingCurves forgetting_curves(const AccuracyMatrix& matrix) {
  ForgettingCurves curves;
  const std::size_t n = matrix.tasks_trained();
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> s;
    for (std::size_t l = t; l < n; ++l) s.push_back(matrix.at(l, t));
    curves.forgetting.push_back(matrix.at(t, t) - matrix.at(n - 1, t));
    curves.series.push_back(std::move(s));
  }
  return curves;
}

PosteriorSnapshot train_task(VariationalNetwork& net, const PosteriorSnapshot& prior,
                             const LabeledDataset& data, int head, int task,
                             const ScenarioConfig& config, std::size_t epochs, Rng& rng) {
  if (data.size() == 0) throw std::invalid_argument("train_task: empty training set");
  if (data.dim() != net.input_dim)
    throw std::invalid_argument("train_task: data width " + std::to_string(data.dim()) +
                                " != network input " + std::to_string(net.input_dim));
  net.head(head);

  Optimizer optimizer(config.optimizer);
  const std::size_t n = data.size();
  const std::size_t bs = std::min(config.batch_size, n);
  const std::size_t n_batches = (n + bs - 1) / bs;
  const double kl_scale = 1.0 / static_cast<double>(n_batches);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Batch batch;
  batch.head = head;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t first = b * bs;
      const std::size_t count = std::min(bs, n - first);
      std::span<const std::size_t> idx(order.data() + first, count);
      batch.inputs = data.inputs.gather_rows(idx);
      batch.labels.resize(count);
      for (std::size_t i = 0; i < count; ++i) batch.labels[i] = data.labels[idx[i]];
      ElboResult r = elbo_loss(net, batch, prior, config.mc_train, kl_scale, rng);
      optimizer.step(net, r.grads);
    }
  }
  return PosteriorSnapshot(net, task);
}

VariationalNetwork replay_coreset(const VariationalNetwork& net, const PosteriorSnapshot& prior,
                                  const Coreset& coreset, const ScenarioConfig& config,
                                  ReplayScope scope, int task, Rng& rng) {
  VariationalNetwork copy = net;
  if (scope == ReplayScope::AllTasks) {
    LabeledDataset all = coreset.union_all();
    if (all.size() == 0) throw std::invalid_argument("replay_coreset: coreset is empty");
    train_task(copy, prior, all, kSharedHead, prior.task(), config, config.effective_replay_epochs(), rng);
  } else {
    const CoresetTask* entry = coreset.find(task);
    if (entry == nullptr || entry->samples.size() == 0)
      throw std::invalid_argument("replay_coreset: no coreset samples for task " + std::to_string(task));
    train_task(copy, prior, entry->samples, task, prior.task(), config, config.finetune_epochs, rng);
  }
  return copy;
}

double accuracy(const VariationalNetwork& net, const LabeledDataset& data, int head,
                std::size_t mc_samples, Rng& rng) {
  if (data.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  const OutputHead& h = net.head(head);
  std::size_t correct = 0;
  for (std::size_t first = 0; first < data.size(); first += kEvalChunk) {
    const std::size_t count = std::min(kEvalChunk, data.size() - first);
    Matrix probs = predictive_probabilities(net, data.inputs.slice_rows(first, count), head, mc_samples, rng);
    for (std::size_t i = 0; i < count; ++i)
      if (h.classes[argmax(probs.row(i))] == data.labels[first + i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<double> evaluate(const VariationalNetwork& net, const TaskStream& stream,
                             std::size_t tasks_seen, const Coreset& coreset,
                             const ScenarioConfig& config) {
  if (tasks_seen == 0 || tasks_seen > stream.tasks.size())
    throw std::invalid_argument("evaluate: tasks_seen " + std::to_string(tasks_seen) + " outside stream of " +
                                std::to_string(stream.tasks.size()));
  std::vector<double> row;
  const Rng base(config.seed);
  for (std::size_t t = 0; t < tasks_seen; ++t) {
    const Task& task = stream.tasks[t];
    Rng rng = base.fork(kEvalStream + 100 * tasks_seen + t);
    if (net.head_mode == HeadMode::MultiHead) {
      const int head = static_cast<int>(t);
      const CoresetTask* entry = coreset.find(task.id);
      if (entry != nullptr && entry->samples.size() > 0 && config.finetune_epochs > 0) {
        PosteriorSnapshot prior(net, static_cast<int>(tasks_seen));
        VariationalNetwork tuned = replay_coreset(net, prior, coreset, config, ReplayScope::OneTask, task.id, rng);
        row.push_back(accuracy(tuned, task.test, head, config.mc_eval, rng));
      } else {
        row.push_back(accuracy(net, task.test, head, config.mc_eval, rng));
      }
    } else {
      row.push_back(accuracy(net, task.test, kSharedHead, config.mc_eval, rng));
    }
  }
  return row;
}

namespace {

GrowthPlan plan_resource_growth(const VariationalNetwork& net, const PruneReport& prune,
                                const LabeledDataset& data, const Task& task,
                                const ScenarioConfig& config, const LogSink& log) {
  const std::size_t n_layers = net.hidden.size();
  std::vector<std::size_t> share(n_layers, 0);
  std::vector<int> present;
  for (int c : task.classes)
    if (std::find(data.labels.begin(), data.labels.end(), c) != data.labels.end()) present.push_back(c);
  if (present.size() >= 2) {
    ActivationStats stats = mean_activations(net, data.inputs, data.labels, present);
    share = estimate_shared(stats, config.gamma);
  } else {
    log_line(log, "task " + std::to_string(task.id + 1) + ": fewer than two classes, no shared-neuron estimate");
  }
  std::vector<std::size_t> pruned(n_layers, 0);
  for (std::size_t k = 0; k < n_layers; ++k) {
    const std::size_t delta = k < prune.delta.size() ? prune.delta[k] : 0;
    pruned[k] = estimate_pruned_neurons(delta, net.hidden[k].fan_in());
  }
  std::vector<std::size_t> req = config.effective_alpha_req();
  return plan_growth_resource(req, share, pruned);
}

PruneReport empty_prune_report(const VariationalNetwork& net, double beta) {
  PruneReport report;
  report.beta = beta;
  for (const auto& layer : net.hidden) {
    report.delta.push_back(0);
    report.masks.emplace_back(layer.weights.size(), false);
    report.weight_counts.push_back(layer.weights.size());
  }
  return report;
}

void attach_prior_head(PosteriorSnapshot& prior, const VariationalNetwork& net, int head, double prior_rho) {
  VariationalNetwork params = prior.params();
  OutputHead h = net.head(head);
  h.layer.weights = GaussianParam::constant(h.layer.weights.rows(), h.layer.weights.cols(), 0.0, prior_rho);
  h.layer.biases = GaussianParam::constant(h.layer.biases.rows(), 1, 0.0, prior_rho);
  params.heads[head] = std::move(h);
  prior = PosteriorSnapshot(std::move(params), prior.task());
}

}  // namespace

RunResult run_continual(const TaskStream& stream, const ScenarioConfig& config, const RunHooks& hooks) {
  config.validate();
  stream.validate();
  if (stream.tasks.empty()) throw std::invalid_argument("run_continual: empty task stream");
  const LogSink& log = hooks.log;
  const Rng root(config.seed);
  const bool single = config.head_mode == HeadMode::SingleHead;

  RunResult result;
  Rng init_rng = root.fork(kInitStream);
  VariationalNetwork net =
      init_network(stream.input_dim(), config.initial_hidden, config.head_mode, config.init, init_rng);
  PosteriorSnapshot prior = PosteriorSnapshot::fresh(net, config.init.prior_rho, 0);

  // Running mean of the inputs of all tasks trained so far.
  std::vector<double> seen_mean(net.input_dim, 0.0);
  std::size_t seen_count = 0;

  for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
    const Task& task = stream.tasks[t];
    const int task_no = static_cast<int>(t) + 1;
    const int head = single ? kSharedHead : static_cast<int>(t);

    Rng coreset_rng = root.fork(kCoresetStream + t);
    CoresetSplit split = split_coreset(task.train, task.id, config.coreset_size_per_task, coreset_rng);
    result.coreset.add(std::move(split.coreset));
    const LabeledDataset& remainder = split.remainder;

    Rng plast_rng = root.fork(kPlasticityStream + t);
    if (t == 0) {
      add_head(net, head, task.classes, config.init, plast_rng);
      prior = PosteriorSnapshot::fresh(net, config.init.prior_rho, 0);
    } else {
      TaskRecord record;
      record.task = task_no;
      record.prune = config.pruning_enabled
                         ? prune_and_reinit(net, prior, config.beta, config.init, plast_rng)
                         : empty_prune_report(net, config.beta);

      const std::size_t n_layers = net.hidden.size();
      switch (config.growth_policy) {
        case GrowthPolicy::ResourceAccounting:
          record.growth = plan_resource_growth(net, record.prune, remainder, task, config, log);
          break;
        case GrowthPolicy::VipScaled: {
          std::vector<double> current = remainder.mean_input();
          record.phi_d = task_distance(current, seen_mean);
          record.phi_s = record.prune.pruned_fraction();
          record.growth =
              uniform_vip_plan(plan_growth_vip(config.kappa, record.phi_d, record.phi_s), n_layers);
          break;
        }
        case GrowthPolicy::None:
          record.growth = GrowthPlan::none(n_layers);
          break;
      }
      grow_hidden_layers(net, prior, record.growth, config.init, plast_rng);

      if (single) {
        const OutputHead& shared = net.head(kSharedHead);
        std::vector<int> fresh_classes;
        for (int c : task.classes)
          if (!shared.row_of(c)) fresh_classes.push_back(c);
        const PosteriorSnapshot restore = prior;
        expand_output_single_head(net, prior, fresh_classes, restore, config.init, plast_rng);
      } else {
        add_head(net, head, task.classes, config.init, plast_rng);
        attach_prior_head(prior, net, head, config.init.prior_rho);
      }
      record.hidden_after = net.hidden_widths();

      log_line(log, "task " + std::to_string(task_no) + ": pruned " +
                        std::to_string(record.prune.total_pruned()) + "/" +
                        std::to_string(record.prune.total_weights()) + ", grew " +
                        std::to_string(record.growth.total()) + ", hidden " +
                        widths_string(record.hidden_after));
      result.records.push_back(std::move(record));
    }

    Rng train_rng = root.fork(kTrainStream + t);
    PosteriorSnapshot trained = train_task(net, prior, remainder, head, task_no, config, config.epochs, train_rng);

    if (single && t > 0) {
      if (result.coreset.empty() || config.effective_replay_epochs() == 0) {
        log_line(log, "task " + std::to_string(task_no) + ": coreset replay skipped (empty coreset or zero epochs)");
      } else {
        Rng replay_rng = root.fork(kReplayStream + t);
        net = replay_coreset(net, trained, result.coreset, config, ReplayScope::AllTasks, task_no, replay_rng);
      }
    }

    PosteriorSnapshot q(net, task_no);
    result.snapshots.push_back(q);
    prior = q;

    const std::vector<double> current = remainder.mean_input();
    const std::size_t n_new = remainder.size();
    for (std::size_t i = 0; i < seen_mean.size(); ++i)
      seen_mean[i] = (seen_mean[i] * static_cast<double>(seen_count) + current[i] * static_cast<double>(n_new)) /
                     static_cast<double>(seen_count + n_new);
    seen_count += n_new;

    result.accuracy.add_row(evaluate(net, stream, t + 1, result.coreset, config));
    {
      std::ostringstream line;
      line << "task " << task_no << ": average accuracy " << result.accuracy.average(t);
      log_line(log, line.str());
    }
    if (hooks.on_task_end) hooks.on_task_end(static_cast<int>(t), net, result.coreset, result.accuracy);
  }
  result.final_net = std::move(net);
  return result;
}

namespace {

constexpr char kCheckpointMagic[8] = {'P', 'B', 'N', 'N', 'C', 'K', 'P', 'T'};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::put_u64(out, checkpoint.tasks_trained);
  detail::put_u64(out, checkpoint.seed);
  write_network(out, checkpoint.net);
  detail::put_u64(out, checkpoint.coreset.tasks().size());
  for (const auto& entry : checkpoint.coreset.tasks()) {
    const LabeledDataset& s = entry.samples;
    detail::put_i64(out, entry.task);
    detail::put_u64(out, entry.quota);
    detail::put_u64(out, s.size());
    detail::put_u64(out, s.dim());
    for (double v : s.inputs.values()) detail::put_f64(out, v);
    for (int label : s.labels) detail::put_i64(out, label);
    for (std::size_t idx : entry.source_indices) detail::put_u64(out, idx);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a progbnn checkpoint: " + path.string());
  Checkpoint cp;
  cp.tasks_trained = detail::get_dim(in);
  cp.seed = detail::get_u64(in);
  cp.net = read_network(in);
  const std::size_t n_tasks = detail::get_dim(in);
  for (std::size_t i = 0; i < n_tasks; ++i) {
    CoresetTask entry;
    entry.task = static_cast<int>(detail::get_i64(in));
    entry.quota = detail::get_dim(in);
    const std::size_t rows = detail::get_dim(in);
    const std::size_t dim = detail::get_dim(in);
    if (rows * dim > (1ULL << 32)) throw std::runtime_error("checkpoint coreset is implausibly large");
    Matrix inputs(rows, dim);
    for (double& v : inputs.values()) v = detail::get_f64(in);
    std::vector<int> labels(rows);
    for (int& label : labels) label = static_cast<int>(detail::get_i64(in));
    entry.source_indices.resize(rows);
    for (std::size_t& idx : entry.source_indices) idx = detail::get_dim(in);
    entry.samples = LabeledDataset(std::move(inputs), std::move(labels));
    cp.coreset.add(std::move(entry));
  }
  if (cp.tasks_trained != n_tasks)
    throw std::runtime_error("checkpoint records " + std::to_string(cp.tasks_trained) + " tasks but " +
                             std::to_string(n_tasks) + " coreset entries");
  return cp;
}

}  // namespace progbnn
