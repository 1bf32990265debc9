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

#include "progbnn/plasticity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace progbnn {

Matrix snr(const GaussianParam& param) {
  Matrix out(param.rows(), param.cols());
  auto mu = param.mu.values();
  auto rho = param.rho.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::abs(mu[i]) / sigma_from_rho(rho[i]);
  return out;
}

std::size_t PruneReport::total_pruned() const {
  return std::accumulate(delta.begin(), delta.end(), std::size_t{0});
}

std::size_t PruneReport::total_weights() const {
  return std::accumulate(weight_counts.begin(), weight_counts.end(), std::size_t{0});
}

double PruneReport::pruned_fraction() const {
  const std::size_t total = total_weights();
  return total == 0 ? 0.0 : static_cast<double>(total_pruned()) / static_cast<double>(total);
}

PruneReport prune_and_reinit(VariationalNetwork& net, PosteriorSnapshot& prior, double beta,
                             const InitSettings& init, Rng& rng) {
  if (!(beta >= 0.0)) throw std::invalid_argument("prune_and_reinit: beta must be >= 0");
  VariationalNetwork prior_params = prior.params();
  if (prior_params.hidden.size() != net.hidden.size())
    throw std::invalid_argument("prune_and_reinit: prior does not match the network");

  PruneReport report;
  report.beta = beta;
  for (std::size_t k = 0; k < net.hidden.size(); ++k) {
    GaussianParam& w = net.hidden[k].weights;
    GaussianParam& pw = prior_params.hidden[k].weights;
    if (!pw.mu.same_shape(w.mu))
      throw std::invalid_argument("prune_and_reinit: prior layer " + std::to_string(k) + " shape differs");
    const Matrix scores = snr(w);
    std::vector<bool> mask(w.size(), false);
    std::size_t pruned = 0;
    auto s = scores.values();
    auto mu = w.mu.values(), rho = w.rho.values();
    auto pmu = pw.mu.values(), prho = pw.rho.values();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!(s[i] < beta)) continue;
      mask[i] = true;
      ++pruned;
      mu[i] = init.mu_std * rng.normal();
      rho[i] = init.rho_init;
      pmu[i] = 0.0;
      prho[i] = init.prior_rho;
    }
    report.delta.push_back(pruned);
    report.masks.push_back(std::move(mask));
    report.weight_counts.push_back(w.size());
  }
  prior = PosteriorSnapshot(std::move(prior_params), prior.task());
  return report;
}

ActivationStats mean_activations(const VariationalNetwork& net, const Matrix& inputs,
                                 std::span<const int> labels, std::span<const int> classes) {
  if (labels.size() != inputs.rows())
    throw std::invalid_argument("mean_activations: one label per input row required");
  std::vector<std::size_t> counts(classes.size(), 0);
  std::vector<std::ptrdiff_t> column(labels.size(), -1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = std::find(classes.begin(), classes.end(), labels[i]);
    if (it == classes.end()) continue;
    column[i] = it - classes.begin();
    ++counts[static_cast<std::size_t>(column[i])];
  }
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (counts[c] == 0)
      throw std::invalid_argument("mean_activations: class " + std::to_string(classes[c]) +
                                  " has no samples");

  ActivationStats stats;
  stats.classes.assign(classes.begin(), classes.end());
  // Hidden activations do not depend on the head, so run the hidden stack only.
  Matrix h = inputs;
  for (const auto& layer : net.hidden) {
    Matrix pre = matmul_transposed_b(h, layer.weights.mu);
    for (std::size_t r = 0; r < pre.rows(); ++r) {
      auto row = pre.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] += layer.biases.mu(j, 0);
        if (layer.activation == Activation::ReLU) row[j] = relu(row[j]);
      }
    }
    Matrix means(layer.fan_out(), classes.size());
    for (std::size_t r = 0; r < pre.rows(); ++r) {
      if (column[r] < 0) continue;
      const auto c = static_cast<std::size_t>(column[r]);
      auto row = pre.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) means(j, c) += row[j];
    }
    for (std::size_t j = 0; j < means.rows(); ++j)
      for (std::size_t c = 0; c < classes.size(); ++c) means(j, c) /= static_cast<double>(counts[c]);
    stats.layers.push_back(std::move(means));
    h = std::move(pre);
  }
  return stats;
}

double average_pairwise_distance(std::span<const double> phi) {
  const std::size_t tc = phi.size();
  if (tc < 2) throw std::invalid_argument("average_pairwise_distance: need at least two classes");
  double sum = 0.0;
  for (std::size_t i = 0; i < tc; ++i)
    for (std::size_t j = i + 1; j < tc; ++j) sum += std::abs(phi[i] - phi[j]);
  return 2.0 * sum / static_cast<double>(tc * (tc - 1));
}

std::vector<std::size_t> estimate_shared(const ActivationStats& stats, double gamma) {
  if (stats.classes.size() < 2)
    throw std::invalid_argument("estimate_shared: need at least two classes (tc >= 2)");
  std::vector<std::size_t> shared;
  for (const Matrix& layer : stats.layers) {
    std::size_t count = 0;
    for (std::size_t n = 0; n < layer.rows(); ++n)
      if (average_pairwise_distance(layer.row(n)) > gamma) ++count;
    shared.push_back(count);
  }
  return shared;
}

std::size_t estimate_pruned_neurons(std::size_t delta, std::size_t fan_in) {
  if (fan_in == 0) throw std::invalid_argument("estimate_pruned_neurons: fan_in must be >= 1");
  return delta / fan_in;
}

std::string to_string(GrowthPolicy policy) {
  switch (policy) {
    case GrowthPolicy::ResourceAccounting:
      return "ResourceAccounting";
    case GrowthPolicy::VipScaled:
      return "VipScaled";
    case GrowthPolicy::None:
      return "None";
  }
  return "None";
}

GrowthPolicy growth_policy_from_string(const std::string& name) {
  if (name == "ResourceAccounting") return GrowthPolicy::ResourceAccounting;
  if (name == "VipScaled") return GrowthPolicy::VipScaled;
  if (name == "None") return GrowthPolicy::None;
  throw std::invalid_argument("unknown growth policy '" + name + "'");
}

std::size_t GrowthPlan::total() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.alpha;
  return n;
}

GrowthPlan GrowthPlan::none(std::size_t n_layers) {
  GrowthPlan plan;
  plan.policy = GrowthPolicy::None;
  plan.layers.resize(n_layers);
  return plan;
}

GrowthPlan plan_growth_resource(std::span<const std::size_t> alpha_req,
                                std::span<const std::size_t> alpha_share,
                                std::span<const std::size_t> alpha_prune) {
  if (alpha_req.size() != alpha_share.size() || alpha_req.size() != alpha_prune.size())
    throw std::invalid_argument("plan_growth_resource: per-layer counts differ in length");
  GrowthPlan plan;
  plan.policy = GrowthPolicy::ResourceAccounting;
  for (std::size_t k = 0; k < alpha_req.size(); ++k) {
    LayerGrowth g;
    g.alpha_req = alpha_req[k];
    g.alpha_share = alpha_share[k];
    g.alpha_prune = alpha_prune[k];
    const std::size_t available = g.alpha_share + g.alpha_prune;
    g.alpha = g.alpha_req > available ? g.alpha_req - available : 0;
    plan.layers.push_back(g);
  }
  return plan;
}

double task_distance(std::span<const double> current_mean, std::span<const double> previous_mean) {
  if (current_mean.size() != previous_mean.size())
    throw std::invalid_argument("task_distance: dimensions " + std::to_string(current_mean.size()) +
                                " and " + std::to_string(previous_mean.size()) + " differ");
  double sq = 0.0;
  for (std::size_t i = 0; i < current_mean.size(); ++i) {
    const double d = current_mean[i] - previous_mean[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

std::size_t plan_growth_vip(double kappa, double phi_d, double phi_s) {
  if (!(kappa >= 0.0) || !(phi_d >= 0.0) || !(phi_s >= 0.0))
    throw std::invalid_argument("plan_growth_vip: kappa, phi_d and phi_s must be >= 0");
  return static_cast<std::size_t>(std::llround(kappa * phi_d * phi_s));
}

GrowthPlan uniform_vip_plan(std::size_t eta, std::size_t n_layers) {
  GrowthPlan plan;
  plan.policy = GrowthPolicy::VipScaled;
  plan.layers.assign(n_layers, LayerGrowth{0, 0, 0, eta});
  return plan;
}

namespace {

// Appends `extra` rows; new entries drawn by `fill`.
template <typename Fill>
Matrix append_rows(const Matrix& m, std::size_t extra, Fill&& fill) {
  Matrix out(m.rows() + extra, m.cols());
  std::copy(m.values().begin(), m.values().end(), out.values().begin());
  for (std::size_t r = m.rows(); r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = fill();
  return out;
}

template <typename Fill>
Matrix append_cols(const Matrix& m, std::size_t extra, Fill&& fill) {
  Matrix out(m.rows(), m.cols() + extra);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::copy(m.row(r).begin(), m.row(r).end(), out.row(r).begin());
    for (std::size_t c = m.cols(); c < out.cols(); ++c) out(r, c) = fill();
  }
  return out;
}

struct Fillers {
  const InitSettings& init;
  Rng& rng;
  auto fresh_mu() {
    return [this] { return init.mu_std * rng.normal(); };
  }
  auto rho() const {
    return [v = init.rho_init] { return v; };
  }
  static auto prior_mu() {
    return [] { return 0.0; };
  }
  auto prior_rho() const {
    return [v = init.prior_rho] { return v; };
  }
};

void add_neurons(VariationalLayer& layer, VariationalLayer& prior_layer, std::size_t extra, Fillers& f) {
  layer.weights = GaussianParam(append_rows(layer.weights.mu, extra, f.fresh_mu()),
                                append_rows(layer.weights.rho, extra, f.rho()));
  layer.biases = GaussianParam(append_rows(layer.biases.mu, extra, f.fresh_mu()),
                               append_rows(layer.biases.rho, extra, f.rho()));
  prior_layer.weights = GaussianParam(append_rows(prior_layer.weights.mu, extra, Fillers::prior_mu()),
                                      append_rows(prior_layer.weights.rho, extra, f.prior_rho()));
  prior_layer.biases = GaussianParam(append_rows(prior_layer.biases.mu, extra, Fillers::prior_mu()),
                                     append_rows(prior_layer.biases.rho, extra, f.prior_rho()));
}

void add_inputs(VariationalLayer& layer, std::size_t extra, Fillers& f) {
  layer.weights = GaussianParam(append_cols(layer.weights.mu, extra, f.fresh_mu()),
                                append_cols(layer.weights.rho, extra, f.rho()));
}

void add_prior_inputs(VariationalLayer& layer, std::size_t extra, Fillers& f) {
  layer.weights = GaussianParam(append_cols(layer.weights.mu, extra, Fillers::prior_mu()),
                                append_cols(layer.weights.rho, extra, f.prior_rho()));
}

}  // namespace

void grow_hidden_layers(VariationalNetwork& net, PosteriorSnapshot& prior, const GrowthPlan& plan,
                        const InitSettings& init, Rng& rng) {
  if (plan.layers.size() != net.hidden.size())
    throw std::invalid_argument("grow_hidden_layers: plan has " + std::to_string(plan.layers.size()) +
                                " layers, network has " + std::to_string(net.hidden.size()));
  if (plan.total() == 0) return;
  VariationalNetwork prior_params = prior.params();
  if (prior_params.hidden.size() != net.hidden.size())
    throw std::invalid_argument("grow_hidden_layers: prior does not match the network");

  Fillers fill{init, rng};
  for (std::size_t k = 0; k < net.hidden.size(); ++k) {
    const std::size_t extra = plan.layers[k].alpha;
    if (extra == 0) continue;
    add_neurons(net.hidden[k], prior_params.hidden[k], extra, fill);
    if (k + 1 < net.hidden.size()) {
      add_inputs(net.hidden[k + 1], extra, fill);
      add_prior_inputs(prior_params.hidden[k + 1], extra, fill);
    } else {
      for (auto& [id, h] : net.heads) add_inputs(h.layer, extra, fill);
      for (auto& [id, h] : prior_params.heads) add_prior_inputs(h.layer, extra, fill);
    }
  }
  net.check_dimensions();
  prior = PosteriorSnapshot(std::move(prior_params), prior.task());
}

void expand_output_single_head(VariationalNetwork& net, PosteriorSnapshot& prior,
                               std::span<const int> new_classes,
                               const PosteriorSnapshot& restore_from, const InitSettings& init,
                               Rng& rng) {
  if (net.head_mode != HeadMode::SingleHead)
    throw std::invalid_argument("expand_output_single_head: network is not single-head");

  std::vector<int> old_classes;
  if (net.has_head(kSharedHead)) old_classes = net.head(kSharedHead).classes;
  for (int c : new_classes)
    if (std::find(old_classes.begin(), old_classes.end(), c) != old_classes.end())
      throw std::invalid_argument("expand_output_single_head: class " + std::to_string(c) +
                                  " is already in the head");

  std::vector<int> classes = old_classes;
  classes.insert(classes.end(), new_classes.begin(), new_classes.end());
  if (classes.empty()) throw std::invalid_argument("expand_output_single_head: head would have no classes");

  const OutputHead* source = nullptr;
  if (!old_classes.empty()) {
    const VariationalNetwork& snap = restore_from.params();
    if (!snap.has_head(kSharedHead))
      throw std::invalid_argument("expand_output_single_head: snapshot has no shared head");
    source = &snap.head(kSharedHead);
    if (source->layer.fan_in() != net.feature_dim())
      throw std::invalid_argument("expand_output_single_head: snapshot head fan_in differs from network");
    for (int c : old_classes)
      if (!source->row_of(c))
        throw std::invalid_argument("expand_output_single_head: snapshot does not cover class " +
                                    std::to_string(c));
  }

  OutputHead head;
  head.classes = classes;
  head.layer = init_layer(net.feature_dim(), classes.size(), Activation::Identity, init, rng);
  for (std::size_t r = 0; r < old_classes.size(); ++r) {
    const std::size_t src = *source->row_of(old_classes[r]);
    auto copy_row = [&](GaussianParam& dst, const GaussianParam& from) {
      std::copy(from.mu.row(src).begin(), from.mu.row(src).end(), dst.mu.row(r).begin());
      std::copy(from.rho.row(src).begin(), from.rho.row(src).end(), dst.rho.row(r).begin());
    };
    copy_row(head.layer.weights, source->layer.weights);
    copy_row(head.layer.biases, source->layer.biases);
  }
  net.heads[kSharedHead] = std::move(head);

  VariationalNetwork prior_params = prior.params();
  OutputHead prior_head;
  prior_head.classes = classes;
  prior_head.layer.activation = Activation::Identity;
  prior_head.layer.weights = GaussianParam::constant(classes.size(), net.feature_dim(), 0.0, init.prior_rho);
  prior_head.layer.biases = GaussianParam::constant(classes.size(), 1, 0.0, init.prior_rho);
  if (prior_params.has_head(kSharedHead)) {
    const OutputHead& old = prior_params.head(kSharedHead);
    if (old.layer.fan_in() != net.feature_dim())
      throw std::invalid_argument("expand_output_single_head: prior head fan_in differs from network");
    for (std::size_t r = 0; r < old_classes.size(); ++r) {
      auto src = old.row_of(old_classes[r]);
      if (!src) continue;
      auto copy_row = [&](GaussianParam& dst, const GaussianParam& from) {
        std::copy(from.mu.row(*src).begin(), from.mu.row(*src).end(), dst.mu.row(r).begin());
        std::copy(from.rho.row(*src).begin(), from.rho.row(*src).end(), dst.rho.row(r).begin());
      };
      copy_row(prior_head.layer.weights, old.layer.weights);
      copy_row(prior_head.layer.biases, old.layer.biases);
    }
  }
  prior_params.heads[kSharedHead] = std::move(prior_head);
  net.check_dimensions();
  prior = PosteriorSnapshot(std::move(prior_params), prior.task());
}

std::string snr_bin_name(std::size_t bin) {
  switch (bin) {
    case 0:
      return "snr_high";
    case 1:
      return "snr_mid";
    default:
      return "snr_low";
  }
}

std::vector<AdaptationRow> weight_adaptation_stats(std::span<const PosteriorSnapshot> snapshots,
                                                   SnrBins bins) {
  if (snapshots.size() < 2)
    throw std::invalid_argument("weight_adaptation_stats: need at least two snapshots");
  const VariationalNetwork& base = snapshots.front().params();
  std::vector<AdaptationRow> rows;
  for (std::size_t k = 0; k < base.hidden.size(); ++k) {
    const GaussianParam& w0 = base.hidden[k].weights;
    const Matrix scores = snr(w0);
    std::vector<std::size_t> bin_of(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double s = scores.values()[i];
      bin_of[i] = s > bins.high ? 0 : (s > bins.low ? 1 : 2);
    }
    for (std::size_t t = 1; t < snapshots.size(); ++t) {
      const VariationalNetwork& prev = snapshots[t - 1].params();
      const VariationalNetwork& cur = snapshots[t].params();
      if (cur.hidden.size() <= k || prev.hidden.size() <= k)
        throw std::invalid_argument("weight_adaptation_stats: snapshots differ in depth");
      const Matrix& mp = prev.hidden[k].weights.mu;
      const Matrix& mc = cur.hidden[k].weights.mu;
      if (mp.rows() < w0.rows() || mp.cols() < w0.cols() || mc.rows() < w0.rows() || mc.cols() < w0.cols())
        throw std::invalid_argument("weight_adaptation_stats: a snapshot is smaller than the first one");
      double sum[3] = {0.0, 0.0, 0.0};
      std::size_t count[3] = {0, 0, 0};
      for (std::size_t r = 0; r < w0.rows(); ++r) {
        for (std::size_t c = 0; c < w0.cols(); ++c) {
          const std::size_t b = bin_of[r * w0.cols() + c];
          sum[b] += std::abs(mc(r, c) - mp(r, c));
          ++count[b];
        }
      }
      for (std::size_t b = 0; b < 3; ++b) {
        AdaptationRow row;
        row.task = snapshots[t].task();
        row.layer = k;
        row.bin = b;
        row.count = count[b];
        row.mean_abs_delta_mu = count[b] == 0 ? 0.0 : sum[b] / static_cast<double>(count[b]);
        rows.push_back(row);
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const AdaptationRow& a, const AdaptationRow& b) {
    return a.task != b.task ? a.task < b.task : a.layer < b.layer;
  });
  return rows;
}

void write_adaptation_csv(std::ostream& out, std::span<const AdaptationRow> rows) {
  out << "task,layer,bin,mean_abs_delta_mu_log10\n";
  for (const auto& row : rows) {
    out << row.task << ',' << row.layer + 1 << ',' << snr_bin_name(row.bin) << ',';
    if (row.count == 0) {
      out << "nan";
    } else if (row.mean_abs_delta_mu == 0.0) {
      out << "-inf";
    } else {
      std::ostringstream v;
      v.precision(10);
      v << std::log10(row.mean_abs_delta_mu);
      out << v.str();
    }
    out << '\n';
  }
}

std::vector<double> significant_fraction(const VariationalNetwork& net, double threshold) {
  std::vector<double> out;
  for (const auto& layer : net.hidden) {
    const Matrix scores = snr(layer.weights);
    std::size_t n = 0;
    for (double s : scores.values())
      if (s >= threshold) ++n;
    out.push_back(scores.size() == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(scores.size()));
  }
  return out;
}

}  // namespace progbnn
