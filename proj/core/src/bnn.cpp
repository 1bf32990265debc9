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

#include "progbnn/bnn.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace progbnn {

GaussianParam::GaussianParam(Matrix mu_, Matrix rho_) : mu(std::move(mu_)), rho(std::move(rho_)) {
  if (!mu.same_shape(rho)) {
    throw std::invalid_argument("GaussianParam: mu " + mu.shape_string() + " and rho " +
                                rho.shape_string() + " differ");
  }
}

GaussianParam GaussianParam::constant(std::size_t rows, std::size_t cols, double mu, double rho) {
  return GaussianParam(Matrix(rows, cols, mu), Matrix(rows, cols, rho));
}

Matrix GaussianParam::sigma() const {
  Matrix s(rho.rows(), rho.cols());
  auto src = rho.values();
  auto dst = s.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sigma_from_rho(src[i]);
  return s;
}

std::optional<std::size_t> OutputHead::row_of(int class_id) const {
  auto it = std::find(classes.begin(), classes.end(), class_id);
  if (it == classes.end()) return std::nullopt;
  return static_cast<std::size_t>(it - classes.begin());
}

std::vector<std::size_t> VariationalNetwork::hidden_widths() const {
  std::vector<std::size_t> widths;
  widths.reserve(hidden.size());
  for (const auto& layer : hidden) widths.push_back(layer.fan_out());
  return widths;
}

std::size_t VariationalNetwork::feature_dim() const {
  return hidden.empty() ? input_dim : hidden.back().fan_out();
}

const OutputHead& VariationalNetwork::head(int id) const {
  auto it = heads.find(id);
  if (it == heads.end()) throw std::out_of_range("unknown output head " + std::to_string(id));
  return it->second;
}

OutputHead& VariationalNetwork::head(int id) {
  auto it = heads.find(id);
  if (it == heads.end()) throw std::out_of_range("unknown output head " + std::to_string(id));
  return it->second;
}

std::size_t VariationalNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : hidden) n += 2 * (layer.weights.size() + layer.biases.size());
  for (const auto& [id, h] : heads) n += 2 * (h.layer.weights.size() + h.layer.biases.size());
  return n;
}

namespace {

void check_layer(const VariationalLayer& layer, const std::string& name) {
  if (!layer.weights.mu.same_shape(layer.weights.rho) || !layer.biases.mu.same_shape(layer.biases.rho))
    throw std::logic_error(name + ": mu/rho shapes differ");
  if (layer.biases.rows() != layer.weights.rows() || layer.biases.cols() != 1)
    throw std::logic_error(name + ": bias shape " + layer.biases.mu.shape_string() +
                           " does not match weights " + layer.weights.mu.shape_string());
}

}  // namespace

void VariationalNetwork::check_dimensions() const {
  std::size_t expected = input_dim;
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    const std::string name = "hidden layer " + std::to_string(k);
    check_layer(hidden[k], name);
    if (hidden[k].fan_in() != expected)
      throw std::logic_error(name + ": fan_in " + std::to_string(hidden[k].fan_in()) +
                             " != previous width " + std::to_string(expected));
    expected = hidden[k].fan_out();
  }
  for (const auto& [id, h] : heads) {
    const std::string name = "head " + std::to_string(id);
    check_layer(h.layer, name);
    if (h.layer.fan_in() != expected)
      throw std::logic_error(name + ": fan_in " + std::to_string(h.layer.fan_in()) +
                             " != feature width " + std::to_string(expected));
    if (h.classes.size() != h.layer.fan_out())
      throw std::logic_error(name + ": class list does not match output rows");
  }
}

GaussianParam init_param(std::size_t rows, std::size_t cols, const InitSettings& init, Rng& rng) {
  Matrix mu = sample_standard_normal(rng, rows, cols);
  for (double& v : mu.values()) v *= init.mu_std;
  return GaussianParam(std::move(mu), Matrix(rows, cols, init.rho_init));
}

VariationalLayer init_layer(std::size_t fan_in, std::size_t fan_out, Activation act,
                            const InitSettings& init, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw std::invalid_argument("init_layer: zero-width layer");
  VariationalLayer layer;
  layer.weights = init_param(fan_out, fan_in, init, rng);
  layer.biases = init_param(fan_out, 1, init, rng);
  layer.activation = act;
  return layer;
}

VariationalNetwork init_network(std::size_t input_dim, std::span<const std::size_t> hidden_sizes,
                                HeadMode mode, const InitSettings& init, Rng& rng) {
  if (hidden_sizes.empty()) throw std::invalid_argument("init_network: need at least one hidden layer");
  if (!std::isfinite(init.rho_init)) throw std::invalid_argument("init_network: rho_init must be finite");
  if (input_dim == 0) throw std::invalid_argument("init_network: zero-width input");
  VariationalNetwork net;
  net.input_dim = input_dim;
  net.head_mode = mode;
  std::size_t fan_in = input_dim;
  for (std::size_t width : hidden_sizes) {
    if (width == 0) throw std::invalid_argument("init_network: zero-width hidden layer");
    net.hidden.push_back(init_layer(fan_in, width, Activation::ReLU, init, rng));
    fan_in = width;
  }
  return net;
}

void add_head(VariationalNetwork& net, int head_id, std::vector<int> classes,
              const InitSettings& init, Rng& rng) {
  if (classes.empty()) throw std::invalid_argument("add_head: head needs at least one class");
  if (net.has_head(head_id)) throw std::invalid_argument("add_head: head " + std::to_string(head_id) + " exists");
  OutputHead h;
  h.layer = init_layer(net.feature_dim(), classes.size(), Activation::Identity, init, rng);
  h.classes = std::move(classes);
  net.heads.emplace(head_id, std::move(h));
}

PosteriorSnapshot::PosteriorSnapshot(VariationalNetwork params, int task)
    : params_(std::move(params)), task_(task) {
  params_.check_dimensions();
}

PosteriorSnapshot PosteriorSnapshot::fresh(const VariationalNetwork& like, double prior_rho, int task) {
  VariationalNetwork prior = like;
  auto reset = [prior_rho](GaussianParam& p) {
    p = GaussianParam::constant(p.rows(), p.cols(), 0.0, prior_rho);
  };
  for (auto& layer : prior.hidden) {
    reset(layer.weights);
    reset(layer.biases);
  }
  for (auto& [id, h] : prior.heads) {
    reset(h.layer.weights);
    reset(h.layer.biases);
  }
  return PosteriorSnapshot(std::move(prior), task);
}

Matrix sample_weights(const GaussianParam& param, const Matrix& epsilon) {
  if (!param.mu.same_shape(epsilon))
    throw std::invalid_argument("sample_weights: epsilon " + epsilon.shape_string() +
                                " does not match parameter " + param.mu.shape_string());
  Matrix w(param.rows(), param.cols());
  auto mu = param.mu.values();
  auto rho = param.rho.values();
  auto eps = epsilon.values();
  auto out = w.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mu[i] + sigma_from_rho(rho[i]) * eps[i];
  return w;
}

namespace {

std::vector<const VariationalLayer*> layer_chain(const VariationalNetwork& net, int head) {
  std::vector<const VariationalLayer*> chain;
  chain.reserve(net.hidden.size() + 1);
  for (const auto& layer : net.hidden) chain.push_back(&layer);
  chain.push_back(&net.head(head).layer);
  return chain;
}

void add_bias_and_activate(Matrix& pre, const Matrix& bias) {
  for (std::size_t r = 0; r < pre.rows(); ++r) {
    auto row = pre.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias(j, 0);
  }
}

}  // namespace

NetworkNoise draw_noise(const VariationalNetwork& net, int head, Rng& rng) {
  NetworkNoise noise;
  for (const VariationalLayer* layer : layer_chain(net, head)) {
    LayerNoise n;
    n.weights = sample_standard_normal(rng, layer->weights.rows(), layer->weights.cols());
    n.biases = sample_standard_normal(rng, layer->biases.rows(), layer->biases.cols());
    noise.push_back(std::move(n));
  }
  return noise;
}

ForwardPass forward_with_noise(const VariationalNetwork& net, const Matrix& x, int head,
                               const NetworkNoise* noise) {
  if (x.cols() != net.input_dim)
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " features, network expects " + std::to_string(net.input_dim));
  const auto chain = layer_chain(net, head);
  if (noise != nullptr && noise->size() != chain.size())
    throw std::invalid_argument("forward: noise does not cover every layer");

  ForwardPass pass;
  pass.inputs.reserve(chain.size() + 1);
  pass.inputs.push_back(x);
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const VariationalLayer& layer = *chain[k];
    if (noise != nullptr) {
      pass.weights.push_back(sample_weights(layer.weights, (*noise)[k].weights));
      pass.biases.push_back(sample_weights(layer.biases, (*noise)[k].biases));
    } else {
      pass.weights.push_back(layer.weights.mu);
      pass.biases.push_back(layer.biases.mu);
    }
    Matrix pre = matmul_transposed_b(pass.inputs.back(), pass.weights.back());
    add_bias_and_activate(pre, pass.biases.back());
    Matrix post = pre;
    if (layer.activation == Activation::ReLU)
      for (double& v : post.values()) v = relu(v);
    pass.preactivations.push_back(std::move(pre));
    if (k + 1 < chain.size()) {
      pass.inputs.push_back(std::move(post));
    } else {
      pass.logits = std::move(post);
    }
  }
  return pass;
}

ForwardPass forward(const VariationalNetwork& net, const Matrix& x, int head, ForwardMode mode) {
  if (mode.rng() == nullptr) return forward_with_noise(net, x, head, nullptr);
  const NetworkNoise noise = draw_noise(net, head, *mode.rng());
  return forward_with_noise(net, x, head, &noise);
}

double gaussian_kl(const GaussianParam& q, const GaussianParam& p) {
  if (!q.mu.same_shape(p.mu) || !q.rho.same_shape(p.rho))
    throw std::invalid_argument("gaussian_kl: shapes " + q.mu.shape_string() + " and " +
                                p.mu.shape_string() + " differ");
  auto mq = q.mu.values(), rq = q.rho.values(), mp = p.mu.values(), rp = p.rho.values();
  double kl = 0.0;
  for (std::size_t i = 0; i < mq.size(); ++i) {
    const double diff = mq[i] - mp[i];
    kl += 0.5 * (rp[i] - rq[i]) + 0.5 * std::expm1(rq[i] - rp[i]) + diff * diff / (2.0 * std::exp(rp[i]));
  }
  return kl;
}

namespace {

ParamGrad zero_grad(const GaussianParam& p) {
  return {Matrix(p.rows(), p.cols()), Matrix(p.rows(), p.cols())};
}

// Adds kl_scale * d KL / d(mu, rho) into grad and returns the unscaled KL.
double accumulate_kl(const GaussianParam& q, const GaussianParam& p, double kl_scale, ParamGrad& grad) {
  auto mq = q.mu.values(), rq = q.rho.values(), mp = p.mu.values(), rp = p.rho.values();
  auto gm = grad.mu.values(), gr = grad.rho.values();
  double kl = 0.0;
  for (std::size_t i = 0; i < mq.size(); ++i) {
    const double diff = mq[i] - mp[i];
    const double inv_var_p = std::exp(-rp[i]);
    const double ratio_m1 = std::expm1(rq[i] - rp[i]);
    kl += 0.5 * (rp[i] - rq[i]) + 0.5 * ratio_m1 + 0.5 * diff * diff * inv_var_p;
    gm[i] += kl_scale * diff * inv_var_p;
    gr[i] += kl_scale * 0.5 * ratio_m1;
  }
  return kl;
}

// d/dmu += dw * scale; d/drho += dw * eps * 0.5 * sigma * scale.
void accumulate_reparam(const Matrix& dw, const GaussianParam& q, const Matrix& eps, double scale,
                        ParamGrad& grad) {
  auto d = dw.values(), rho = q.rho.values(), e = eps.values();
  auto gm = grad.mu.values(), gr = grad.rho.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    gm[i] += scale * d[i];
    gr[i] += scale * d[i] * e[i] * 0.5 * sigma_from_rho(rho[i]);
  }
}

void check_prior(const VariationalNetwork& net, const PosteriorSnapshot& prior, int head) {
  const VariationalNetwork& p = prior.params();
  bool ok = p.hidden.size() == net.hidden.size() && p.has_head(head);
  for (std::size_t k = 0; ok && k < net.hidden.size(); ++k)
    ok = p.hidden[k].weights.mu.same_shape(net.hidden[k].weights.mu) &&
         p.hidden[k].biases.mu.same_shape(net.hidden[k].biases.mu);
  if (ok)
    ok = p.head(head).layer.weights.mu.same_shape(net.head(head).layer.weights.mu) &&
         p.head(head).layer.biases.mu.same_shape(net.head(head).layer.biases.mu);
  if (!ok) throw std::invalid_argument("elbo_loss: prior is not shape-compatible with the network");
}

}  // namespace

ElboResult elbo_loss_with_noise(const VariationalNetwork& net, const Batch& batch,
                                const PosteriorSnapshot& prior,
                                std::span<const NetworkNoise> noise, double kl_scale) {
  if (batch.inputs.rows() == 0 || batch.labels.size() != batch.inputs.rows())
    throw std::invalid_argument("elbo_loss: batch must be non-empty with one label per row");
  if (noise.empty()) throw std::invalid_argument("elbo_loss: need at least one MC sample");
  check_prior(net, prior, batch.head);

  const OutputHead& head = net.head(batch.head);
  std::vector<std::size_t> targets(batch.labels.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto row = head.row_of(batch.labels[i]);
    if (!row)
      throw std::invalid_argument("elbo_loss: label " + std::to_string(batch.labels[i]) +
                                  " is not in head " + std::to_string(batch.head) + "'s class set");
    targets[i] = *row;
  }

  const auto chain = layer_chain(net, batch.head);
  ElboResult result;
  result.grads.head = batch.head;
  for (const VariationalLayer* layer : chain)
    result.grads.layers.push_back({zero_grad(layer->weights), zero_grad(layer->biases)});

  const double mc_scale = 1.0 / static_cast<double>(noise.size());
  for (const NetworkNoise& sample_noise : noise) {
    ForwardPass pass = forward_with_noise(net, batch.inputs, batch.head, &sample_noise);

    Matrix delta = pass.logits;
    double nll = 0.0;
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      auto row = delta.row(r);
      const std::vector<double> lsm = log_softmax(row);
      nll -= lsm[targets[r]];
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = std::exp(lsm[j]);
      row[targets[r]] -= 1.0;
    }
    result.nll += mc_scale * nll;

    for (std::size_t k = chain.size(); k-- > 0;) {
      const Matrix dw = matmul_transposed_a(delta, pass.inputs[k]);
      Matrix db(delta.cols(), 1);
      for (std::size_t r = 0; r < delta.rows(); ++r) {
        auto row = delta.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) db(j, 0) += row[j];
      }
      accumulate_reparam(dw, chain[k]->weights, sample_noise[k].weights, mc_scale,
                         result.grads.layers[k].weights);
      accumulate_reparam(db, chain[k]->biases, sample_noise[k].biases, mc_scale,
                         result.grads.layers[k].biases);
      if (k == 0) break;
      Matrix below = matmul(delta, pass.weights[k]);
      if (chain[k - 1]->activation == Activation::ReLU) {
        auto pre = pass.preactivations[k - 1].values();
        auto d = below.values();
        for (std::size_t i = 0; i < d.size(); ++i)
          if (pre[i] <= 0.0) d[i] = 0.0;
      }
      delta = std::move(below);
    }
  }

  const VariationalNetwork& p = prior.params();
  for (std::size_t k = 0; k < chain.size(); ++k) {
    const VariationalLayer& prior_layer = k < net.hidden.size() ? p.hidden[k] : p.head(batch.head).layer;
    result.kl += accumulate_kl(chain[k]->weights, prior_layer.weights, kl_scale, result.grads.layers[k].weights);
    result.kl += accumulate_kl(chain[k]->biases, prior_layer.biases, kl_scale, result.grads.layers[k].biases);
  }
  result.loss = result.nll + kl_scale * result.kl;
  if (!std::isfinite(result.loss)) throw std::runtime_error("elbo_loss: loss is not finite");
  return result;
}

ElboResult elbo_loss(const VariationalNetwork& net, const Batch& batch,
                     const PosteriorSnapshot& prior, std::size_t n_mc, double kl_scale, Rng& rng) {
  if (n_mc == 0) throw std::invalid_argument("elbo_loss: n_mc must be at least 1");
  std::vector<NetworkNoise> noise;
  noise.reserve(n_mc);
  for (std::size_t m = 0; m < n_mc; ++m) noise.push_back(draw_noise(net, batch.head, rng));
  return elbo_loss_with_noise(net, batch, prior, noise, kl_scale);
}

void Optimizer::update(std::size_t slot, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Optimizer: gradient size mismatch");
  const double lr = settings_.lr;
  if (settings_.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
    return;
  }
  Moments& mom = slots_[slot];
  if (mom.m.size() != params.size()) {
    mom.m.assign(params.size(), 0.0);
    mom.v.assign(params.size(), 0.0);
    mom.steps = 0;
  }
  ++mom.steps;
  const double b1 = settings_.beta1, b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(mom.steps));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(mom.steps));
  for (std::size_t i = 0; i < params.size(); ++i) {
    mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * grads[i];
    mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * grads[i] * grads[i];
    params[i] -= lr * (mom.m[i] / c1) / (std::sqrt(mom.v[i] / c2) + settings_.epsilon);
  }
}

void Optimizer::step(VariationalNetwork& net, const Gradients& grads) {
  if (grads.layers.size() != net.hidden.size() + 1)
    throw std::invalid_argument("Optimizer::step: gradient layer count mismatch");
  for (std::size_t k = 0; k < grads.layers.size(); ++k) {
    VariationalLayer& layer = k < net.hidden.size() ? net.hidden[k] : net.head(grads.head).layer;
    const LayerGrad& g = grads.layers[k];
    // Heads get their own slot range so multi-head training never mixes moments.
    const std::size_t base = k < net.hidden.size()
                                 ? 4 * k
                                 : 4 * (net.hidden.size() + static_cast<std::size_t>(grads.head) + 1);
    update(base + 0, layer.weights.mu.values(), g.weights.mu.values());
    update(base + 1, layer.weights.rho.values(), g.weights.rho.values());
    update(base + 2, layer.biases.mu.values(), g.biases.mu.values());
    update(base + 3, layer.biases.rho.values(), g.biases.rho.values());
  }
}

void optimizer_step(VariationalNetwork& net, const Gradients& grads, Optimizer& optimizer) {
  optimizer.step(net, grads);
}

Matrix predictive_probabilities(const VariationalNetwork& net, const Matrix& x, int head,
                                std::size_t n_samples, Rng& rng) {
  auto softmax_rows = [](Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) softmax_inplace(m.row(r));
  };
  if (n_samples == 0) {
    Matrix p = forward(net, x, head, ForwardMode::mean_only()).logits;
    softmax_rows(p);
    return p;
  }
  Matrix total;
  for (std::size_t s = 0; s < n_samples; ++s) {
    Matrix p = forward(net, x, head, ForwardMode::sampled(rng)).logits;
    softmax_rows(p);
    if (s == 0) {
      total = std::move(p);
    } else {
      auto dst = total.values();
      auto src = p.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  for (double& v : total.values()) v /= static_cast<double>(n_samples);
  return total;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr char kNetMagic[8] = {'P', 'B', 'N', 'N', 'N', 'E', 'T', '1'};

using detail::get_dim;
using detail::get_u64;
using detail::put_u64;

void put_matrix_values(std::ostream& out, const Matrix& m) {
  for (double v : m.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

Matrix get_matrix_values(std::istream& in, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = std::bit_cast<double>(get_u64(in));
  return m;
}

void put_layer(std::ostream& out, const VariationalLayer& layer) {
  put_u64(out, layer.activation == Activation::ReLU ? 0 : 1);
  put_u64(out, layer.fan_out());
  put_u64(out, layer.fan_in());
  put_matrix_values(out, layer.weights.mu);
  put_matrix_values(out, layer.weights.rho);
  put_matrix_values(out, layer.biases.mu);
  put_matrix_values(out, layer.biases.rho);
}

VariationalLayer get_layer(std::istream& in) {
  VariationalLayer layer;
  const std::uint64_t act = get_u64(in);
  if (act > 1) throw std::runtime_error("network record has an unknown activation");
  layer.activation = act == 0 ? Activation::ReLU : Activation::Identity;
  const std::size_t rows = get_dim(in);
  const std::size_t cols = get_dim(in);
  Matrix mu_w = get_matrix_values(in, rows, cols);
  Matrix rho_w = get_matrix_values(in, rows, cols);
  layer.weights = GaussianParam(std::move(mu_w), std::move(rho_w));
  Matrix mu_b = get_matrix_values(in, rows, 1);
  Matrix rho_b = get_matrix_values(in, rows, 1);
  layer.biases = GaussianParam(std::move(mu_b), std::move(rho_b));
  return layer;
}

}  // namespace

void write_network(std::ostream& out, const VariationalNetwork& net) {
  out.write(kNetMagic, sizeof kNetMagic);
  put_u64(out, net.input_dim);
  put_u64(out, net.head_mode == HeadMode::SingleHead ? 0 : 1);
  put_u64(out, net.hidden.size());
  for (const auto& layer : net.hidden) put_layer(out, layer);
  put_u64(out, net.heads.size());
  for (const auto& [id, h] : net.heads) {
    put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(id)));
    put_u64(out, h.classes.size());
    for (int c : h.classes) put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(c)));
    put_layer(out, h.layer);
  }
}

VariationalNetwork read_network(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kNetMagic, sizeof magic) != 0)
    throw std::runtime_error("not a network record (bad magic)");
  VariationalNetwork net;
  net.input_dim = get_dim(in);
  const std::uint64_t mode = get_u64(in);
  if (mode > 1) throw std::runtime_error("network record has an unknown head mode");
  net.head_mode = mode == 0 ? HeadMode::SingleHead : HeadMode::MultiHead;
  const std::size_t n_hidden = get_dim(in);
  for (std::size_t k = 0; k < n_hidden; ++k) net.hidden.push_back(get_layer(in));
  const std::size_t n_heads = get_dim(in);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const int id = static_cast<int>(static_cast<std::int64_t>(get_u64(in)));
    OutputHead head;
    const std::size_t n_classes = get_dim(in);
    for (std::size_t c = 0; c < n_classes; ++c)
      head.classes.push_back(static_cast<int>(static_cast<std::int64_t>(get_u64(in))));
    head.layer = get_layer(in);
    net.heads.emplace(id, std::move(head));
  }
  try {
    net.check_dimensions();
  } catch (const std::logic_error& e) {
    throw std::runtime_error(std::string("network record is inconsistent: ") + e.what());
  }
  return net;
}

}  // namespace progbnn
