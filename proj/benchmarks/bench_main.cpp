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


#include <benchmark/benchmark.h>

#include <vector>

#include "progbnn/bnn.hpp"
#include "progbnn/continual.hpp"
#include "progbnn/plasticity.hpp"

namespace {

using namespace progbnn;

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform();
  return m;
}

VariationalNetwork mnist_network(std::size_t width, Rng& rng) {
  InitSettings init;
  std::vector<std::size_t> hidden{width, width};
  VariationalNetwork net = init_network(784, hidden, HeadMode::SingleHead, init, rng);
  add_head(net, kSharedHead, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, init, rng);
  return net;
}

Batch mnist_batch(std::size_t n, Rng& rng) {
  Batch batch;
  batch.inputs = random_matrix(n, 784, rng);
  for (std::size_t i = 0; i < n; ++i) batch.labels.push_back(static_cast<int>(i % 10));
  return batch;
}

void BM_matmul_transposed_b(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix a = random_matrix(64, 784, rng), b = random_matrix(n, 784, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_transposed_b(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(64 * 784 * n));
}
BENCHMARK(BM_matmul_transposed_b)->Arg(64)->Arg(128)->Arg(256);

void BM_matmul(benchmark::State& state) {
  Rng rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_matmul)->Arg(32)->Arg(128);

void BM_sampled_forward(benchmark::State& state) {
  Rng rng(3);
  VariationalNetwork net = mnist_network(static_cast<std::size_t>(state.range(0)), rng);
  Batch batch = mnist_batch(64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, batch.inputs, kSharedHead, ForwardMode::sampled(rng)));
}
BENCHMARK(BM_sampled_forward)->Arg(64)->Arg(128);

void BM_elbo_step(benchmark::State& state) {
  Rng rng(4);
  VariationalNetwork net = mnist_network(static_cast<std::size_t>(state.range(0)), rng);
  const PosteriorSnapshot prior = PosteriorSnapshot::fresh(net, 0.0);
  Batch batch = mnist_batch(64, rng);
  Optimizer optimizer{OptimizerSettings{}};
  for (auto _ : state) {
    ElboResult r = elbo_loss(net, batch, prior, 1, 0.01, rng);
    optimizer.step(net, r.grads);
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_elbo_step)->Arg(64)->Arg(128);

void BM_prune_and_reinit(benchmark::State& state) {
  Rng rng(5);
  const VariationalNetwork base = mnist_network(128, rng);
  for (auto _ : state) {
    state.PauseTiming();
    VariationalNetwork net = base;
    PosteriorSnapshot prior(net, 0);
    state.ResumeTiming();
    benchmark::DoNotOptimize(prune_and_reinit(net, prior, 0.5, InitSettings{}, rng));
  }
}
BENCHMARK(BM_prune_and_reinit);

void BM_mean_activations(benchmark::State& state) {
  Rng rng(6);
  const VariationalNetwork net = mnist_network(128, rng);
  Batch batch = mnist_batch(1000, rng);
  const std::vector<int> classes{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  for (auto _ : state) benchmark::DoNotOptimize(mean_activations(net, batch.inputs, batch.labels, classes));
}
BENCHMARK(BM_mean_activations);

void BM_accuracy(benchmark::State& state) {
  Rng rng(7);
  const VariationalNetwork net = mnist_network(128, rng);
  Batch batch = mnist_batch(1000, rng);
  const LabeledDataset data(batch.inputs, batch.labels);
  for (auto _ : state) benchmark::DoNotOptimize(accuracy(net, data, kSharedHead, 10, rng));
}
BENCHMARK(BM_accuracy);

}  // namespace

BENCHMARK_MAIN();
