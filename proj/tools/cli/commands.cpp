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

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <regex>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#ifndef PROGBNN_VERSION
#define PROGBNN_VERSION "0.1.0"
#endif

namespace progbnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string widths_string(const std::vector<std::size_t>& widths) {
  std::string s = "[";
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(widths[i]);
  }
  return s + "]";
}

json config_json(const RunConfig& config) {
  json j = json::object();
  for (const auto& key : config_keys()) j[key] = get_value(config, key);
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string growth_csv(const RunResult& r) {
  std::string s = "task,layer,alpha_req,alpha_share,alpha_prune,alpha,width_after\n";
  for (const auto& rec : r.records)
    for (std::size_t k = 0; k < rec.growth.layers.size(); ++k) {
      const auto& g = rec.growth.layers[k];
      s += std::to_string(rec.task) + "," + std::to_string(k + 1) + "," + std::to_string(g.alpha_req) + "," +
           std::to_string(g.alpha_share) + "," + std::to_string(g.alpha_prune) + "," + std::to_string(g.alpha) +
           "," + std::to_string(rec.hidden_after.at(k)) + "\n";
    }
  return s;
}

std::string prune_csv(const RunResult& r) {
  std::string s = "task,layer,delta,weights,fraction\n";
  for (const auto& rec : r.records)
    for (std::size_t k = 0; k < rec.prune.delta.size(); ++k) {
      const std::size_t w = rec.prune.weight_counts[k];
      const double f = w ? static_cast<double>(rec.prune.delta[k]) / static_cast<double>(w) : 0.0;
      s += std::to_string(rec.task) + "," + std::to_string(k + 1) + "," + std::to_string(rec.prune.delta[k]) +
           "," + std::to_string(w) + "," + fixed(f, 6) + "\n";
    }
  return s;
}

json summary_json(const RunConfig& config, const RunResult& r, double seconds) {
  json j;
  j["config"] = config_json(config);
  j["seed"] = config.scenario.seed;
  json rows = json::array();
  json averages = json::array();
  for (std::size_t l = 0; l < r.accuracy.tasks_trained(); ++l) {
    rows.push_back(r.accuracy.row(l));
    averages.push_back(r.accuracy.average(l));
  }
  j["accuracy_matrix"] = rows;
  j["average_accuracy"] = averages;
  j["final_accuracy"] = r.accuracy.final_average();
  j["forgetting"] = forgetting_curves(r.accuracy).forgetting;
  j["final_architecture"] = r.final_net.hidden_widths();
  j["parameter_count"] = r.final_net.parameter_count();
  json records = json::array();
  for (const auto& rec : r.records) {
    json g = json::array();
    for (const auto& l : rec.growth.layers)
      g.push_back({{"alpha_req", l.alpha_req},
                   {"alpha_share", l.alpha_share},
                   {"alpha_prune", l.alpha_prune},
                   {"alpha", l.alpha}});
    records.push_back({{"task", rec.task},
                       {"delta", rec.prune.delta},
                       {"pruned_fraction", rec.prune.pruned_fraction()},
                       {"growth_policy", to_string(rec.growth.policy)},
                       {"growth", g},
                       {"hidden_after", rec.hidden_after},
                       {"phi_d", rec.phi_d},
                       {"phi_s", rec.phi_s}});
  }
  j["task_boundaries"] = records;
  j["runtime_seconds"] = seconds;
  return j;
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double final_accuracy = 0.0;
  std::vector<std::size_t> architecture;
  std::vector<std::string> artifacts;
  double seconds = 0.0;
};

SeedOutcome run_seed(RunConfig config, const fs::path& out_dir, std::ostream* log) {
  SeedOutcome outcome;
  outcome.seed = config.scenario.seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const fs::path dir = out_dir / ("seed_" + std::to_string(config.scenario.seed));
    fs::create_directories(dir);
    auto record = [&](const fs::path& p) { outcome.artifacts.push_back(p.string()); };

    TaskStream stream = build_stream(config.stream, config.scenario.seed);
    RunHooks hooks;
    if (log != nullptr)
      hooks.log = [log, seed = config.scenario.seed](std::string_view line) {
        *log << "[seed " << seed << "] " << line << "\n";
      };
    hooks.on_task_end = [&](int task, const VariationalNetwork& net, const Coreset& coreset, const AccuracyMatrix&) {
      Checkpoint cp{static_cast<std::size_t>(task) + 1, config.scenario.seed, net, coreset};
      const fs::path p = dir / ("checkpoint_task_" + std::to_string(task + 1));
      save_checkpoint(p, cp);
      record(p);
    };
    RunResult r = run_continual(stream, config.scenario, hooks);
    outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_text(dir / "config.txt", serialize_config(config));
    record(dir / "config.txt");
    {
      std::ostringstream csv;
      r.accuracy.write_csv(csv);
      write_text(dir / "accuracy_matrix.csv", csv.str());
      record(dir / "accuracy_matrix.csv");
    }
    write_text(dir / "growth.csv", growth_csv(r));
    record(dir / "growth.csv");
    write_text(dir / "prune.csv", prune_csv(r));
    record(dir / "prune.csv");
    {
      std::ostringstream csv;
      std::vector<AdaptationRow> rows;
      if (r.snapshots.size() >= 2) rows = weight_adaptation_stats(r.snapshots);
      write_adaptation_csv(csv, rows);
      write_text(dir / "adaptation_stats.csv", csv.str());
      record(dir / "adaptation_stats.csv");
    }
    write_text(dir / "summary.json", summary_json(config, r, outcome.seconds).dump(2) + "\n");
    record(dir / "summary.json");

    outcome.final_accuracy = r.accuracy.final_average();
    outcome.architecture = r.final_net.hidden_widths();
    outcome.ok = true;
  } catch (const std::exception& e) {
    outcome.error = e.what();
  }
  return outcome;
}

void print_error(std::ostream& err, const std::string& what) { err << "error: " << what << "\n"; }

}  // namespace

std::string version_string() { return PROGBNN_VERSION; }

RunConfig resolve_config(const std::string& config, const std::vector<std::string>& overrides) {
  RunConfig c = load_config(config);
  apply_overrides(c, overrides);
  c.scenario.validate();
  return c;
}

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = resolve_config(options.config, options.overrides);
    if (options.subsample_per_class) config.stream.subsample_per_class = *options.subsample_per_class;
    if (options.deterministic) config.scenario.deterministic = true;
    if (options.seeds == 0) throw ConfigError("--seeds must be at least 1");
  } catch (const std::exception& e) {
    print_error(err, e.what());
    return 2;
  }

  const fs::path out_dir(options.out_dir);
  try {
    fs::create_directories(out_dir);
  } catch (const std::exception& e) {
    print_error(err, e.what());
    return 1;
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<RunConfig> runs;
  for (std::size_t i = 0; i < options.seeds; ++i) {
    RunConfig c = config;
    c.scenario.seed = config.scenario.seed + i;
    runs.push_back(c);
  }
  std::vector<SeedOutcome> outcomes;
  std::ostream* log = options.quiet ? nullptr : &out;
  if (config.scenario.deterministic || runs.size() == 1) {
    for (const auto& c : runs) outcomes.push_back(run_seed(c, out_dir, log));
  } else {
    std::vector<std::future<SeedOutcome>> futures;
    for (const auto& c : runs) futures.push_back(std::async(std::launch::async, run_seed, c, out_dir, nullptr));
    for (auto& f : futures) outcomes.push_back(f.get());
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  bool all_ok = true;
  std::vector<double> accs;
  std::vector<std::vector<std::size_t>> archs;
  json seeds = json::array();
  json artifacts = json::array();
  json layout = json::object();
  for (const auto& o : outcomes) {
    json s = {{"seed", o.seed}, {"ok", o.ok}, {"seconds", o.seconds}};
    if (o.ok) {
      accs.push_back(o.final_accuracy);
      archs.push_back(o.architecture);
      s["final_accuracy"] = o.final_accuracy;
      s["final_architecture"] = o.architecture;
      out << "seed " << o.seed << ": accuracy " << fixed(100.0 * o.final_accuracy, 2) << "%, final architecture "
          << widths_string(o.architecture) << "\n";
    } else {
      all_ok = false;
      s["error"] = o.error;
      print_error(err, "seed " + std::to_string(o.seed) + " failed: " + o.error);
    }
    for (const auto& a : o.artifacts) artifacts.push_back(a);
    layout["seed_" + std::to_string(o.seed)] = (out_dir / ("seed_" + std::to_string(o.seed))).string();
    seeds.push_back(s);
  }

  if (!accs.empty()) {
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    const double sd = accs.size() > 1 ? std::sqrt(var / static_cast<double>(accs.size() - 1)) : 0.0;
    std::vector<std::size_t> mean_arch(archs.front().size(), 0);
    for (std::size_t k = 0; k < mean_arch.size(); ++k) {
      double m = 0.0;
      for (const auto& a : archs) m += static_cast<double>(a[k]);
      mean_arch[k] = static_cast<std::size_t>(std::llround(m / static_cast<double>(archs.size())));
    }
    out << "Accuracy: " << fixed(100.0 * mean, 2) << " +- " << fixed(100.0 * sd, 2) << " % over " << accs.size()
        << " seed(s); mean final architecture " << widths_string(mean_arch) << "\n";
  }

  json manifest;
  manifest["version"] = version_string();
  manifest["config"] = config_json(config);
  manifest["seeds"] = seeds;
  manifest["layout"] = layout;
  manifest["artifacts"] = artifacts;
  manifest["timing"] = {{"total_seconds", total}};
  manifest["completed"] = all_ok;
  try {
    write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    print_error(err, e.what());
    return 1;
  }
  return all_ok ? 0 : 1;
}

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
  try {
    RunConfig config = resolve_config(options.config, options.overrides);
    Checkpoint cp = load_checkpoint(options.checkpoint);
    cp.net.check_dimensions();
    config.scenario.seed = cp.seed;
    if (cp.net.head_mode != config.scenario.head_mode)
      throw std::runtime_error("checkpoint head mode differs from the config's head_mode");
    TaskStream stream = build_stream(config.stream, cp.seed);
    if (cp.tasks_trained == 0 || cp.tasks_trained > stream.tasks.size())
      throw std::runtime_error("checkpoint covers " + std::to_string(cp.tasks_trained) + " tasks but the stream has " +
                               std::to_string(stream.tasks.size()));
    if (cp.net.input_dim != stream.input_dim())
      throw std::runtime_error("checkpoint input width " + std::to_string(cp.net.input_dim) + " != stream width " +
                               std::to_string(stream.input_dim()));
    for (std::size_t t = 0; t < cp.tasks_trained; ++t) {
      const Task& task = stream.tasks[t];
      const int head = cp.net.head_mode == HeadMode::MultiHead ? static_cast<int>(t) : kSharedHead;
      if (!cp.net.has_head(head)) throw std::runtime_error("checkpoint has no head for task " + std::to_string(t + 1));
      const OutputHead& h = cp.net.head(head);
      for (int c : task.classes)
        if (!h.row_of(c))
          throw std::runtime_error("class " + std::to_string(c) + " of task " + std::to_string(t + 1) +
                                   " is missing from the checkpoint's output head");
    }
    std::vector<double> row = evaluate(cp.net, stream, cp.tasks_trained, cp.coreset, config.scenario);
    for (std::size_t t = 0; t < row.size(); ++t)
      out << "task " << (t + 1) << ": " << fixed(row[t], 6) << "\n";
    out << "average: " << fixed(average_accuracy(row), 6) << "\n";
    return 0;
  } catch (const std::exception& e) {
    print_error(err, e.what());
    return 1;
  }
}

int cmd_stats(const StatsOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const fs::path dir(options.checkpoint_dir);
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    const std::regex pattern("checkpoint_task_([0-9]+)");
    std::map<int, fs::path> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
      std::smatch m;
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && std::regex_match(name, m, pattern)) found[std::stoi(m[1].str())] = entry.path();
    }
    if (found.size() < 2)
      throw std::runtime_error("need at least two checkpoint_task_<t> files in " + dir.string() + ", found " +
                               std::to_string(found.size()));
    std::vector<PosteriorSnapshot> snapshots;
    for (const auto& [task, path] : found) snapshots.emplace_back(load_checkpoint(path).net, task);

    const fs::path csv_path = options.out_csv.empty() ? dir / "adaptation_stats.csv" : fs::path(options.out_csv);
    std::ostringstream csv;
    write_adaptation_csv(csv, weight_adaptation_stats(snapshots));
    write_text(csv_path, csv.str());
    out << "wrote " << csv_path.string() << "\n";

    const SnrBins bins;
    out << "task,layer,significant_fraction\n";
    for (const auto& s : snapshots) {
      const auto fractions = significant_fraction(s.params(), bins.high);
      for (std::size_t k = 0; k < fractions.size(); ++k)
        out << s.task() << "," << (k + 1) << "," << fixed(fractions[k], 6) << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    print_error(err, e.what());
    return 1;
  }
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"progbnn: continual learning with progressive Bayesian MLPs"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  TrainOptions train;
  std::size_t subsample = 0;
  auto* train_cmd = app.add_subcommand("train", "Run the continual pipeline for one or more seeds");
  train_cmd->add_option("--config", train.config, "Preset name or config file path")->required();
  train_cmd->add_option("--set", train.overrides, "KEY=VALUE override, repeatable");
  train_cmd->add_option("--seeds", train.seeds, "Number of seeds (config seed, seed + 1, ...)");
  train_cmd->add_option("--out", train.out_dir, "Output directory");
  train_cmd->add_flag("--deterministic", train.deterministic, "Serial, bit-reproducible execution");
  auto* subsample_opt =
      train_cmd->add_option("--subsample-per-class", subsample, "Keep at most N training samples per class");
  train_cmd->add_flag("--quiet", train.quiet, "Only print the per-seed and aggregate lines");

  EvaluateOptions evaluate_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on its task stream");
  eval_cmd->add_option("checkpoint", evaluate_opts.checkpoint, "checkpoint_task_<t> file")->required();
  eval_cmd->add_option("--config", evaluate_opts.config, "Preset name or config file path")->required();
  eval_cmd->add_option("--set", evaluate_opts.overrides, "KEY=VALUE override, repeatable");

  StatsOptions stats;
  auto* stats_cmd = app.add_subcommand("stats", "Weight-adaptation statistics across task checkpoints");
  stats_cmd->add_option("checkpoint_dir", stats.checkpoint_dir, "Directory with checkpoint_task_<t> files")->required();
  stats_cmd->add_option("--out", stats.out_csv, "CSV path");

  auto* presets_cmd = app.add_subcommand("presets", "Print a preset as a config file");
  std::string preset_name;
  presets_cmd->add_option("name", preset_name, "Preset name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (*train_cmd) {
    if (subsample_opt->count() > 0) train.subsample_per_class = subsample;
    return cmd_train(train, out, err);
  }
  if (*eval_cmd) return cmd_evaluate(evaluate_opts, out, err);
  if (*stats_cmd) return cmd_stats(stats, out, err);
  if (*presets_cmd) {
    if (preset_name.empty()) {
      for (const auto& n : preset_names()) out << n << "\n";
      return 0;
    }
    try {
      out << serialize_config(preset(preset_name));
      return 0;
    } catch (const std::exception& e) {
      print_error(err, e.what());
      return 2;
    }
  }
  return 1;
}

}  // namespace progbnn::cli
