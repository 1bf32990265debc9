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

// Structural adaptation of a variational network between tasks: SNR pruning
// with re-initialization, capacity accounting, neuron growth and single-head
// output expansion.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "progbnn/bnn.hpp"

namespace progbnn {

/// Elementwise |mu| / sigma.
Matrix snr(const GaussianParam& param);

struct PruneReport {
  double beta = 0.0;
  /// Pruned connection count per hidden layer.
  std::vector<std::size_t> delta;
  /// Row-major (fan_out x fan_in) masks; true where the weight was re-initialized.
  std::vector<std::vector<bool>> masks;
  /// Weight count per hidden layer at pruning time.
  std::vector<std::size_t> weight_counts;

  std::size_t total_pruned() const;
  std::size_t total_weights() const;
  /// total_pruned / total_weights, 0 for an empty network.
  double pruned_fraction() const;
};

/// Re-initializes every hidden-layer weight with SNR < beta (mu ~ N(0, mu_std^2),
/// rho = rho_init) and resets the matching prior entries to the fresh prior
/// (mu = 0, rho = prior_rho). Biases and output heads are never pruned.
PruneReport prune_and_reinit(VariationalNetwork& net, PosteriorSnapshot& prior, double beta,
                             const InitSettings& init, Rng& rng);

/// Per hidden layer: neurons x classes matrix of mean post-activations under
/// a MeanOnly forward pass.
struct ActivationStats {
  std::vector<int> classes;
  std::vector<Matrix> layers;
};

ActivationStats mean_activations(const VariationalNetwork& net, const Matrix& inputs,
                                 std::span<const int> labels, std::span<const int> classes);

/// (2 / (tc (tc - 1))) * sum_{i<j} |phi_i - phi_j|.
double average_pairwise_distance(std::span<const double> phi);

/// Per layer, the number of neurons whose average pairwise class distance
/// exceeds gamma. Requires at least two classes.
std::vector<std::size_t> estimate_shared(const ActivationStats& stats, double gamma);

/// floor(delta / fan_in): pruned connections as whole-neuron equivalents.
std::size_t estimate_pruned_neurons(std::size_t delta, std::size_t fan_in);

enum class GrowthPolicy { ResourceAccounting, VipScaled, None };

std::string to_string(GrowthPolicy policy);
GrowthPolicy growth_policy_from_string(const std::string& name);

struct LayerGrowth {
  std::size_t alpha_req = 0;
  std::size_t alpha_share = 0;
  std::size_t alpha_prune = 0;
  std::size_t alpha = 0;

  friend bool operator==(const LayerGrowth&, const LayerGrowth&) = default;
};

struct GrowthPlan {
  GrowthPolicy policy = GrowthPolicy::None;
  std::vector<LayerGrowth> layers;

  std::size_t total() const;
  static GrowthPlan none(std::size_t n_layers);
};

/// alpha = max(0, req - (share + prune)) per layer.
GrowthPlan plan_growth_resource(std::span<const std::size_t> alpha_req,
                                std::span<const std::size_t> alpha_share,
                                std::span<const std::size_t> alpha_prune);

/// Euclidean distance between two mean input vectors.
double task_distance(std::span<const double> current_mean, std::span<const double> previous_mean);

/// round(kappa * phi_d * phi_s) neurons per hidden layer.
std::size_t plan_growth_vip(double kappa, double phi_d, double phi_s);
GrowthPlan uniform_vip_plan(std::size_t eta, std::size_t n_layers);

/// Adds plan.layers[k].alpha neurons to hidden layer k: new rows in layer k,
/// new columns in its consumer (layer k + 1 or every head). New parameters
/// are freshly initialized; the prior gains fresh-prior entries at the same
/// positions. Existing parameters keep their values and indices.
void grow_hidden_layers(VariationalNetwork& net, PosteriorSnapshot& prior, const GrowthPlan& plan,
                        const InitSettings& init, Rng& rng);

/// Single-head output expansion: appends rows for new_classes, re-initializes
/// the whole head, then restores the rows of previously seen classes from
/// `restore_from`. The prior head gains fresh-prior rows for the new classes.
/// With no existing head this attaches a freshly initialized one.
void expand_output_single_head(VariationalNetwork& net, PosteriorSnapshot& prior,
                               std::span<const int> new_classes,
                               const PosteriorSnapshot& restore_from, const InitSettings& init,
                               Rng& rng);

struct SnrBins {
  double high = 0.01;
  double low = 1e-5;
};

std::string snr_bin_name(std::size_t bin);

struct AdaptationRow {
  int task = 0;
  std::size_t layer = 0;
  std::size_t bin = 0;  // 0: SNR > high, 1: low < SNR <= high, 2: SNR <= low
  std::size_t count = 0;
  double mean_abs_delta_mu = 0.0;
};

/// Bins hidden-layer weights by their SNR in the first snapshot and reports,
/// for each later snapshot, the mean |delta mu| against its predecessor over
/// the weights that existed in the first snapshot.
std::vector<AdaptationRow> weight_adaptation_stats(std::span<const PosteriorSnapshot> snapshots,
                                                   SnrBins bins = {});

/// Columns: task,layer,bin,mean_abs_delta_mu_log10. Zero change prints -inf,
/// an empty bin prints nan.
void write_adaptation_csv(std::ostream& out, std::span<const AdaptationRow> rows);

/// Fraction of hidden-layer weights with SNR >= threshold, per layer.
std::vector<double> significant_fraction(const VariationalNetwork& net, double threshold);

}  // namespace progbnn
