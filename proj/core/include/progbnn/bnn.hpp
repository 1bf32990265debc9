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

// Mean-field Gaussian variational MLP trained with Bayes by Backprop.
//
// Every weight and bias is an independent Gaussian N(mu, sigma^2) with
// sigma = exp(0.5 * rho). Samples are drawn with the reparameterization
// w = mu + sigma * eps, and gradients of the negative ELBO are derived by hand.

#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "progbnn/numerics.hpp"

namespace progbnn {

inline double sigma_from_rho(double rho) { return std::exp(0.5 * rho); }

struct GaussianParam {
  Matrix mu;
  Matrix rho;

  GaussianParam() = default;
  GaussianParam(Matrix mu, Matrix rho);
  static GaussianParam constant(std::size_t rows, std::size_t cols, double mu, double rho);

  std::size_t rows() const { return mu.rows(); }
  std::size_t cols() const { return mu.cols(); }
  std::size_t size() const { return mu.size(); }
  Matrix sigma() const;

  friend bool operator==(const GaussianParam&, const GaussianParam&) = default;
};

enum class Activation { ReLU, Identity };

struct VariationalLayer {
  GaussianParam weights;  // fan_out x fan_in
  GaussianParam biases;   // fan_out x 1
  Activation activation = Activation::ReLU;

  std::size_t fan_in() const { return weights.cols(); }
  std::size_t fan_out() const { return weights.rows(); }

  friend bool operator==(const VariationalLayer&, const VariationalLayer&) = default;
};

/// Output layer plus the class id predicted by each of its rows.
struct OutputHead {
  VariationalLayer layer;
  std::vector<int> classes;

  std::optional<std::size_t> row_of(int class_id) const;

  friend bool operator==(const OutputHead&, const OutputHead&) = default;
};

enum class HeadMode { SingleHead, MultiHead };

/// Head id used by the shared output layer in single-head mode.
inline constexpr int kSharedHead = 0;

struct VariationalNetwork {
  std::size_t input_dim = 0;
  HeadMode head_mode = HeadMode::SingleHead;
  std::vector<VariationalLayer> hidden;
  std::map<int, OutputHead> heads;

  std::vector<std::size_t> hidden_widths() const;
  std::size_t feature_dim() const;
  bool has_head(int id) const { return heads.count(id) != 0; }
  const OutputHead& head(int id) const;
  OutputHead& head(int id);
  std::size_t parameter_count() const;

  /// Throws std::logic_error when layer dimensions do not chain.
  void check_dimensions() const;

  friend bool operator==(const VariationalNetwork&, const VariationalNetwork&) = default;
};

struct InitSettings {
  double mu_std = 0.1;
  double rho_init = -6.0;
  /// rho of the zero-mean prior placed on fresh parameters.
  double prior_rho = -6.0;
};

/// Fresh variational parameters: mu ~ N(0, mu_std^2), rho = rho_init.
GaussianParam init_param(std::size_t rows, std::size_t cols, const InitSettings& init, Rng& rng);
VariationalLayer init_layer(std::size_t fan_in, std::size_t fan_out, Activation act,
                            const InitSettings& init, Rng& rng);

/// Builds the hidden stack; heads are attached with add_head.
VariationalNetwork init_network(std::size_t input_dim, std::span<const std::size_t> hidden_sizes,
                                HeadMode mode, const InitSettings& init, Rng& rng);
void add_head(VariationalNetwork& net, int head_id, std::vector<int> classes,
              const InitSettings& init, Rng& rng);

/// Frozen copy of a network's variational parameters, tagged with a task.
class PosteriorSnapshot {
 public:
  PosteriorSnapshot(VariationalNetwork params, int task);

  /// Zero-mean prior with rho = prior_rho, shaped like `like`.
  static PosteriorSnapshot fresh(const VariationalNetwork& like, double prior_rho, int task = 0);

  const VariationalNetwork& params() const { return params_; }
  int task() const { return task_; }

 private:
  VariationalNetwork params_;
  int task_;
};

/// mu + exp(0.5 * rho) * epsilon, elementwise.
Matrix sample_weights(const GaussianParam& param, const Matrix& epsilon);

struct LayerNoise {
  Matrix weights;
  Matrix biases;
};
/// One entry per hidden layer followed by one for the selected head.
using NetworkNoise = std::vector<LayerNoise>;

NetworkNoise draw_noise(const VariationalNetwork& net, int head, Rng& rng);

class ForwardMode {
 public:
  static ForwardMode mean_only() { return ForwardMode(nullptr); }
  static ForwardMode sampled(Rng& rng) { return ForwardMode(&rng); }
  Rng* rng() const { return rng_; }

 private:
  explicit ForwardMode(Rng* rng) : rng_(rng) {}
  Rng* rng_;
};

struct ForwardPass {
  /// inputs[k] feeds layer k; inputs[k + 1] is the post-activation of hidden layer k.
  std::vector<Matrix> inputs;
  std::vector<Matrix> preactivations;
  /// Weights and biases actually used, per layer.
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
  Matrix logits;

  const Matrix& hidden_activation(std::size_t k) const { return inputs.at(k + 1); }
};

ForwardPass forward(const VariationalNetwork& net, const Matrix& x, int head, ForwardMode mode);
/// noise == nullptr runs with epsilon = 0.
ForwardPass forward_with_noise(const VariationalNetwork& net, const Matrix& x, int head,
                               const NetworkNoise* noise);

/// Closed-form KL(q || p) summed over elements.
double gaussian_kl(const GaussianParam& q, const GaussianParam& p);

struct Batch {
  Matrix inputs;
  std::vector<int> labels;  // class ids, mapped to rows by the head
  int head = kSharedHead;
};

struct ParamGrad {
  Matrix mu;
  Matrix rho;
};
struct LayerGrad {
  ParamGrad weights;
  ParamGrad biases;
};
struct Gradients {
  int head = kSharedHead;
  std::vector<LayerGrad> layers;  // hidden layers, then the head
};

struct ElboResult {
  double loss = 0.0;
  double nll = 0.0;  // mean over MC samples of the summed cross-entropy
  double kl = 0.0;   // unscaled KL(q || prior) over hidden layers and the head
  Gradients grads;
};

/// Negative ELBO of one minibatch:
///   mean_mc sum_batch -log p(y | w, x) + kl_scale * KL(q || prior)
/// over the hidden layers and the batch's head. Noise is drawn once per layer
/// per MC sample.
ElboResult elbo_loss(const VariationalNetwork& net, const Batch& batch,
                     const PosteriorSnapshot& prior, std::size_t n_mc, double kl_scale, Rng& rng);
/// Same with caller-supplied noise, one NetworkNoise per MC sample.
ElboResult elbo_loss_with_noise(const VariationalNetwork& net, const Batch& batch,
                                const PosteriorSnapshot& prior,
                                std::span<const NetworkNoise> noise, double kl_scale);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Plain SGD (p -= lr * g) or Adam with bias correction. Moment buffers are
/// kept per parameter slot and reset whenever a slot changes size.
class Optimizer {
 public:
  explicit Optimizer(OptimizerSettings settings) : settings_(settings) {}

  const OptimizerSettings& settings() const { return settings_; }
  void step(VariationalNetwork& net, const Gradients& grads);
  void update(std::size_t slot, std::span<double> params, std::span<const double> grads);

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
    long steps = 0;
  };
  OptimizerSettings settings_;
  std::map<std::size_t, Moments> slots_;
};

void optimizer_step(VariationalNetwork& net, const Gradients& grads, Optimizer& optimizer);

/// Softmax probabilities averaged over n_samples forward passes (MeanOnly when
/// n_samples == 0).
Matrix predictive_probabilities(const VariationalNetwork& net, const Matrix& x, int head,
                                std::size_t n_samples, Rng& rng);

// Binary network serialization. Layout, all integers little-endian u64 and
// all reals IEEE-754 binary64:
//   magic "PBNNNET1", input_dim, head_mode (0 single / 1 multi),
//   n_hidden, per hidden layer: activation, fan_out, fan_in,
//     mu_w, rho_w (row-major), mu_b, rho_b,
//   n_heads, per head: id (i64), n_classes, class ids (i64), then the layer
//   record as above.
void write_network(std::ostream& out, const VariationalNetwork& net);
VariationalNetwork read_network(std::istream& in);

}  // namespace progbnn
