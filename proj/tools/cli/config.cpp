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

#include "config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#ifndef PROGBNN_DEFAULT_DATA_DIR
#define PROGBNN_DEFAULT_DATA_DIR "data/mnist"
#endif

namespace progbnn::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("invalid value '" + value + "' for key '" + key + "': expected " + expected);
}

double parse_real(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (value.empty() || end != begin + value.size() || !std::isfinite(v)) bad_value(key, value, "a finite number");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size())
    bad_value(key, value, "a non-negative integer");
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true or false");
}

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& value) {
  std::vector<std::size_t> widths;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) widths.push_back(parse_count(key, trim(item)));
  if (widths.empty()) bad_value(key, value, "comma-separated widths");
  return widths;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_widths(const std::vector<std::size_t>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(widths[i]);
  }
  return s;
}

std::string format_bool(bool v) { return v ? "true" : "false"; }

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

#define REAL_FIELD(name, member)                                                         \
  Field {                                                                                \
    name, [](const RunConfig& c) { return format_real(c.member); },                      \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_real(k, v); } \
  }
#define COUNT_FIELD(name, member)                                                        \
  Field {                                                                                \
    name, [](const RunConfig& c) { return std::to_string(c.member); },                   \
        [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_count(k, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"head_mode",
       [](const RunConfig& c) {
         return std::string(c.scenario.head_mode == HeadMode::SingleHead ? "single_head" : "multi_head");
       },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "single_head") c.scenario.head_mode = HeadMode::SingleHead;
         else if (v == "multi_head") c.scenario.head_mode = HeadMode::MultiHead;
         else bad_value(k, v, "single_head or multi_head");
       }},
      {"growth_policy", [](const RunConfig& c) { return to_string(c.scenario.growth_policy); },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           c.scenario.growth_policy = growth_policy_from_string(v);
         } catch (const std::invalid_argument&) {
           bad_value(k, v, "ResourceAccounting, VipScaled or None");
         }
       }},
      {"pruning_enabled", [](const RunConfig& c) { return format_bool(c.scenario.pruning_enabled); },
       [](RunConfig& c, const std::string& k, const std::string& v) { c.scenario.pruning_enabled = parse_bool(k, v); }},
      REAL_FIELD("beta", scenario.beta),
      REAL_FIELD("gamma", scenario.gamma),
      REAL_FIELD("kappa", scenario.kappa),
      COUNT_FIELD("coreset_size_per_task", scenario.coreset_size_per_task),
      {"initial_hidden", [](const RunConfig& c) { return format_widths(c.scenario.initial_hidden); },
       [](RunConfig& c, const std::string& k, const std::string& v) { c.scenario.initial_hidden = parse_widths(k, v); }},
      {"alpha_req",
       [](const RunConfig& c) {
         return c.scenario.alpha_req.empty() ? std::string("auto") : format_widths(c.scenario.alpha_req);
       },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") c.scenario.alpha_req.clear();
         else c.scenario.alpha_req = parse_widths(k, v);
       }},
      REAL_FIELD("mu_std", scenario.init.mu_std),
      REAL_FIELD("rho_init", scenario.init.rho_init),
      REAL_FIELD("prior_rho", scenario.init.prior_rho),
      {"optimizer",
       [](const RunConfig& c) {
         return std::string(c.scenario.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd");
       },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "adam") c.scenario.optimizer.kind = OptimizerKind::Adam;
         else if (v == "sgd") c.scenario.optimizer.kind = OptimizerKind::Sgd;
         else bad_value(k, v, "adam or sgd");
       }},
      REAL_FIELD("lr", scenario.optimizer.lr),
      REAL_FIELD("adam_beta1", scenario.optimizer.beta1),
      REAL_FIELD("adam_beta2", scenario.optimizer.beta2),
      REAL_FIELD("adam_epsilon", scenario.optimizer.epsilon),
      COUNT_FIELD("epochs", scenario.epochs),
      COUNT_FIELD("batch_size", scenario.batch_size),
      COUNT_FIELD("mc_train", scenario.mc_train),
      COUNT_FIELD("mc_eval", scenario.mc_eval),
      {"replay_epochs",
       [](const RunConfig& c) {
         return c.scenario.replay_epochs ? std::to_string(*c.scenario.replay_epochs) : std::string("auto");
       },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "auto") c.scenario.replay_epochs.reset();
         else c.scenario.replay_epochs = parse_count(k, v);
       }},
      COUNT_FIELD("finetune_epochs", scenario.finetune_epochs),
      {"seed", [](const RunConfig& c) { return std::to_string(c.scenario.seed); },
       [](RunConfig& c, const std::string& k, const std::string& v) { c.scenario.seed = parse_u64(k, v); }},
      {"deterministic", [](const RunConfig& c) { return format_bool(c.scenario.deterministic); },
       [](RunConfig& c, const std::string& k, const std::string& v) { c.scenario.deterministic = parse_bool(k, v); }},
      {"stream",
       [](const RunConfig& c) {
         switch (c.stream.kind) {
           case StreamKind::SplitMnist: return std::string("split_mnist");
           case StreamKind::PermutedMnist: return std::string("permuted_mnist");
           case StreamKind::Synthetic: return std::string("synthetic");
         }
         return std::string("split_mnist");
       },
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "split_mnist") c.stream.kind = StreamKind::SplitMnist;
         else if (v == "permuted_mnist") c.stream.kind = StreamKind::PermutedMnist;
         else if (v == "synthetic") c.stream.kind = StreamKind::Synthetic;
         else bad_value(k, v, "split_mnist, permuted_mnist or synthetic");
       }},
      {"data_dir", [](const RunConfig& c) { return c.stream.data_dir; },
       [](RunConfig& c, const std::string&, const std::string& v) { c.stream.data_dir = v; }},
      COUNT_FIELD("n_tasks", stream.n_tasks),
      COUNT_FIELD("subsample_per_class", stream.subsample_per_class),
      COUNT_FIELD("synthetic_classes_per_task", stream.synthetic_classes_per_task),
      COUNT_FIELD("synthetic_dim", stream.synthetic_dim),
      REAL_FIELD("synthetic_separation", stream.synthetic_separation),
      REAL_FIELD("synthetic_sigma", stream.synthetic_sigma),
      COUNT_FIELD("synthetic_n_per_class", stream.synthetic_n_per_class),
  };
  return table;
}

#undef REAL_FIELD
#undef COUNT_FIELD

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

bool same_config(const RunConfig& a, const RunConfig& b) {
  for (const auto& f : fields())
    if (f.get(a) != f.get(b)) return false;
  return true;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

std::vector<std::string> preset_names() { return {"pmnist", "mh_smnist", "ta_smnist", "synthetic_smoke"}; }

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.stream.data_dir = default_data_dir();
  ScenarioConfig& s = c.scenario;
  s.epochs = 10;
  s.init.prior_rho = 0.0;
  if (name == "mh_smnist") {
    s.head_mode = HeadMode::MultiHead;
    s.beta = std::exp(-5.0);
    s.gamma = 0.2;
    s.coreset_size_per_task = 40;
    s.initial_hidden = {64, 64};
    c.stream.kind = StreamKind::SplitMnist;
  } else if (name == "ta_smnist") {
    s.head_mode = HeadMode::SingleHead;
    s.beta = std::exp(-2.5);
    s.gamma = 0.1;
    s.coreset_size_per_task = 20;
    s.initial_hidden = {128, 128};
    s.replay_epochs = 50;
    s.init.prior_rho = -2.0;
    c.stream.kind = StreamKind::SplitMnist;
  } else if (name == "pmnist") {
    s.head_mode = HeadMode::SingleHead;
    s.beta = std::exp(-5.0);
    s.gamma = 0.12;
    s.coreset_size_per_task = 200;
    s.initial_hidden = {32, 32};
    c.stream.kind = StreamKind::PermutedMnist;
    c.stream.n_tasks = 10;
  } else if (name == "synthetic_smoke") {
    s.head_mode = HeadMode::MultiHead;
    s.beta = std::exp(-5.0);
    s.gamma = 0.2;
    s.coreset_size_per_task = 10;
    s.initial_hidden = {16, 16};
    s.epochs = 20;
    s.mc_eval = 5;
    s.optimizer.lr = 0.01;
    c.stream.kind = StreamKind::Synthetic;
    c.stream.n_tasks = 3;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

void set_value(RunConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, key, value);
}

std::string get_value(const RunConfig& config, const std::string& key) { return field(key).get(config); }

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    set_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
  return out;
}

RunConfig load_config(const std::string& name_or_path) {
  const std::filesystem::path path(name_or_path);
  if (std::filesystem::is_regular_file(path)) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + name_or_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig base;
    base.stream.data_dir = default_data_dir();
    return parse_config(buf.str(), base);
  }
  for (const auto& name : preset_names())
    if (name == name_or_path) return preset(name);
  throw ConfigError("config file not found and not a preset: '" + name_or_path + "'");
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not KEY=VALUE");
    set_value(config, trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
}

std::string default_data_dir() {
  if (const char* env = std::getenv("PROGBNN_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return PROGBNN_DEFAULT_DATA_DIR;
}

TaskStream build_stream(const StreamConfig& stream, std::uint64_t seed) {
  if (stream.kind == StreamKind::Synthetic) {
    SyntheticSpec spec;
    spec.n_tasks = stream.n_tasks;
    spec.classes_per_task = stream.synthetic_classes_per_task;
    spec.dim = stream.synthetic_dim;
    spec.separation = stream.synthetic_separation;
    spec.sigma = stream.synthetic_sigma;
    spec.n_per_class = stream.synthetic_n_per_class;
    spec.seed = seed;
    return build_synthetic_stream(spec);
  }
  const std::filesystem::path dir(stream.data_dir);
  LabeledDataset train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  LabeledDataset test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  if (stream.subsample_per_class > 0) train = subsample_per_class(train, stream.subsample_per_class, seed);
  if (stream.kind == StreamKind::PermutedMnist) return build_permuted_stream(train, test, stream.n_tasks, seed);
  auto groups = default_mnist_groups();
  if (stream.n_tasks == 0 || stream.n_tasks > groups.size())
    throw ConfigError("n_tasks must lie in [1, " + std::to_string(groups.size()) + "] for split_mnist");
  groups.resize(stream.n_tasks);
  return build_split_stream(train, test, groups);
}

}  // namespace progbnn::cli
