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

// Hand-rolled random generators for the property tests. Every generator is
// driven by an explicit Rng so failures replay from the printed case seed.

#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "progbnn/bnn.hpp"
#include "progbnn/continual.hpp"
#include "progbnn/numerics.hpp"

namespace progbnn::testing {

inline double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

inline std::size_t size_in(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform_index(hi - lo + 1));
}

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = uniform_in(rng, lo, hi);
  return m;
}

inline GaussianParam random_param(Rng& rng, std::size_t rows, std::size_t cols, double mu_abs = 2.0,
                                  double rho_lo = -6.0, double rho_hi = 1.0) {
  return GaussianParam(random_matrix(rng, rows, cols, -mu_abs, mu_abs), random_matrix(rng, rows, cols, rho_lo, rho_hi));
}

/// Network with the given widths, random mu/rho, and one head per entry of
/// head_classes (ids 0, 1, ...).
inline VariationalNetwork random_network(Rng& rng, std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                         const std::vector<std::vector<int>>& head_classes,
                                         HeadMode mode = HeadMode::MultiHead, double rho_lo = -4.0,
                                         double rho_hi = -1.0) {
  InitSettings init;
  VariationalNetwork net = init_network(input_dim, hidden, mode, init, rng);
  for (std::size_t h = 0; h < head_classes.size(); ++h) add_head(net, static_cast<int>(h), head_classes[h], init, rng);
  auto randomize = [&](GaussianParam& p) { p = random_param(rng, p.rows(), p.cols(), 1.0, rho_lo, rho_hi); };
  for (auto& layer : net.hidden) {
    randomize(layer.weights);
    randomize(layer.biases);
  }
  for (auto& [id, head] : net.heads) {
    randomize(head.layer.weights);
    randomize(head.layer.biases);
  }
  return net;
}

inline Batch random_batch(Rng& rng, const VariationalNetwork& net, int head, std::size_t n) {
  Batch batch;
  batch.head = head;
  batch.inputs = random_matrix(rng, n, net.input_dim, -1.5, 1.5);
  const auto& classes = net.head(head).classes;
  for (std::size_t i = 0; i < n; ++i) batch.labels.push_back(classes[rng.uniform_index(classes.size())]);
  return batch;
}

/// Prior shaped like `net` with random parameters.
inline PosteriorSnapshot random_prior(Rng& rng, const VariationalNetwork& net) {
  VariationalNetwork p = net;
  auto randomize = [&](GaussianParam& g) { g = random_param(rng, g.rows(), g.cols(), 1.0, -3.0, 0.5); };
  for (auto& layer : p.hidden) {
    randomize(layer.weights);
    randomize(layer.biases);
  }
  for (auto& [id, head] : p.heads) {
    randomize(head.layer.weights);
    randomize(head.layer.biases);
  }
  return PosteriorSnapshot(std::move(p), 0);
}

/// Calls visit(param, grad) for every (parameter, gradient) matrix pair
/// touched by a loss on `head`.
template <typename Visit>
void for_each_param_grad(VariationalNetwork& net, const Gradients& grads, Visit&& visit) {
  for (std::size_t k = 0; k < net.hidden.size(); ++k) {
    visit(net.hidden[k].weights.mu, grads.layers[k].weights.mu);
    visit(net.hidden[k].weights.rho, grads.layers[k].weights.rho);
    visit(net.hidden[k].biases.mu, grads.layers[k].biases.mu);
    visit(net.hidden[k].biases.rho, grads.layers[k].biases.rho);
  }
  auto& head = net.head(grads.head).layer;
  const auto& g = grads.layers.back();
  visit(head.weights.mu, g.weights.mu);
  visit(head.weights.rho, g.weights.rho);
  visit(head.biases.mu, g.biases.mu);
  visit(head.biases.rho, g.biases.rho);
}

/// Max over entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
/// with central differences of step h. Noise is held fixed.
inline double max_gradient_error(VariationalNetwork net, const Batch& batch, const PosteriorSnapshot& prior,
                                 std::span<const NetworkNoise> noise, double kl_scale, double h = 1e-5) {
  const ElboResult base = elbo_loss_with_noise(net, batch, prior, noise, kl_scale);
  double worst = 0.0;
  for_each_param_grad(net, base.grads, [&](Matrix& param, const Matrix& grad) {
    for (std::size_t i = 0; i < param.size(); ++i) {
      double& p = param.values()[i];
      const double saved = p;
      p = saved + h;
      const double up = elbo_loss_with_noise(net, batch, prior, noise, kl_scale).loss;
      p = saved - h;
      const double down = elbo_loss_with_noise(net, batch, prior, noise, kl_scale).loss;
      p = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grad.values()[i];
      const double scale = std::max({1e-6, std::abs(analytic), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    }
  });
  return worst;
}

/// Monte Carlo estimate of KL(q || p) = E_q[log q(w) - log p(w)].
inline double monte_carlo_kl(const GaussianParam& q, const GaussianParam& p, std::size_t n, Rng& rng) {
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double mq = q.mu.values()[i], sq = std::exp(0.5 * q.rho.values()[i]);
    const double mp = p.mu.values()[i], sp = std::exp(0.5 * p.rho.values()[i]);
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double e = rng.normal();
      const double w = mq + sq * e;
      const double zp = (w - mp) / sp;
      acc += (-std::log(sq) - 0.5 * e * e) - (-std::log(sp) - 0.5 * zp * zp);
    }
    total += acc / static_cast<double>(n);
  }
  return total;
}

}  // namespace progbnn::testing
