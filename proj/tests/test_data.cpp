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


#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include "doctest.h"
#include "progbnn/bnn.hpp"
#include "progbnn/data.hpp"
#include "support/generators.hpp"

using namespace progbnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = fs::temp_directory_path() /
           ("progbnn_data_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {std::uint8_t(v >> 24), std::uint8_t(v >> 16), std::uint8_t(v >> 8), std::uint8_t(v)};
}

std::vector<std::uint8_t> cat(std::initializer_list<std::vector<std::uint8_t>> parts) {
  std::vector<std::uint8_t> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Two 3x3 images with pixel bytes 0..17 and labels {7, 2}.
std::vector<std::uint8_t> fixture_images(std::uint32_t magic = 0x00000803, std::uint32_t count = 2,
                                         std::size_t pixel_bytes = 18) {
  std::vector<std::uint8_t> px;
  for (std::size_t i = 0; i < pixel_bytes; ++i) px.push_back(static_cast<std::uint8_t>(i * 15));
  return cat({be32(magic), be32(count), be32(3), be32(3), px});
}

std::vector<std::uint8_t> fixture_labels(std::uint32_t magic = 0x00000801, std::uint32_t count = 2) {
  return cat({be32(magic), be32(count), {7, 2}});
}

LabeledDataset small_dataset(Rng& rng, std::size_t n, std::size_t dim, int n_classes) {
  Matrix x = progbnn::testing::random_matrix(rng, n, dim, 0.0, 1.0);
  std::vector<int> y;
  for (std::size_t i = 0; i < n; ++i) y.push_back(static_cast<int>(i % static_cast<std::size_t>(n_classes)));
  return LabeledDataset(std::move(x), std::move(y));
}

}  // namespace

TEST_CASE("LabeledDataset computes its class set and validates counts") {
  LabeledDataset d(Matrix(3, 2), {4, 1, 4});
  CHECK(d.class_set == std::vector<int>{1, 4});
  CHECK_THROWS_AS(LabeledDataset(Matrix(3, 2), {1, 2}), std::invalid_argument);
  std::vector<std::size_t> idx{2, 0};
  LabeledDataset s = d.subset(idx);
  CHECK(s.labels == std::vector<int>{4, 4});
  CHECK(s.class_set == std::vector<int>{4});
}

TEST_CASE("crafted IDX fixture recovers exact pixel values") {
  TempDir dir;
  write_bytes(dir.path / "img", fixture_images());
  write_bytes(dir.path / "lab", fixture_labels());
  LabeledDataset d = load_idx(dir.path / "img", dir.path / "lab");
  REQUIRE(d.size() == 2);
  CHECK(d.dim() == 9);
  CHECK(d.labels == std::vector<int>{7, 2});
  for (std::size_t i = 0; i < 18; ++i) CHECK(d.inputs.values()[i] == static_cast<double>(i * 15) / 255.0);
  CHECK(d.inputs(1, 8) == 1.0);
}

TEST_CASE("IDX parsing reports distinct error types") {
  TempDir dir;
  write_bytes(dir.path / "img", fixture_images());
  write_bytes(dir.path / "lab", fixture_labels());
  write_bytes(dir.path / "lab_as_img", fixture_labels(0x00000803));
  CHECK_THROWS_AS(load_idx(dir.path / "img", dir.path / "lab_as_img"), IdxMagicError);
  CHECK_THROWS_AS(load_idx(dir.path / "lab", dir.path / "lab"), IdxMagicError);

  write_bytes(dir.path / "img3", fixture_images(0x00000803, 3, 27));
  CHECK_THROWS_AS(load_idx(dir.path / "img3", dir.path / "lab"), IdxCountMismatchError);

  write_bytes(dir.path / "short", fixture_images(0x00000803, 2, 10));
  CHECK_THROWS_AS(load_idx(dir.path / "short", dir.path / "lab"), IdxTruncatedError);
  write_bytes(dir.path / "header", {0, 0, 8});
  CHECK_THROWS_AS(load_idx(dir.path / "header", dir.path / "lab"), IdxTruncatedError);
  CHECK_THROWS_AS(load_idx(dir.path / "missing", dir.path / "lab"), IdxError);
}

TEST_CASE("IDX write then read is bit-identical on random datasets") {
  Rng rng(1);
  TempDir dir;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t side = progbnn::testing::size_in(rng, 1, 6), n = progbnn::testing::size_in(rng, 1, 30);
    Matrix x(n, side * side);
    for (double& v : x.values()) v = static_cast<double>(rng.uniform_index(256)) / 255.0;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) y.push_back(static_cast<int>(rng.uniform_index(10)));
    LabeledDataset d(std::move(x), std::move(y));
    write_idx(dir.path / "i", dir.path / "l", d);
    LabeledDataset back = load_idx(dir.path / "i", dir.path / "l");
    CHECK(back == d);
    for (double v : back.inputs.values()) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("split streams partition the data by class group") {
  Rng rng(2);
  LabeledDataset train = small_dataset(rng, 100, 4, 10), test = small_dataset(rng, 40, 4, 10);
  TaskStream s = build_split_stream(train, test, default_mnist_groups());
  REQUIRE(s.tasks.size() == 5);
  std::size_t total = 0;
  std::multiset<double> seen, all(train.inputs.values().begin(), train.inputs.values().end());
  for (const Task& t : s.tasks) {
    for (int y : t.train.labels) CHECK(std::find(t.classes.begin(), t.classes.end(), y) != t.classes.end());
    for (int y : t.test.labels) CHECK(std::find(t.classes.begin(), t.classes.end(), y) != t.classes.end());
    total += t.train.size();
    seen.insert(t.train.inputs.values().begin(), t.train.inputs.values().end());
  }
  CHECK(total == train.size());
  CHECK(seen == all);
  CHECK(s.tasks[0].classes == std::vector<int>{0, 1});
  CHECK(s.tasks[3].id == 3);
  CHECK_NOTHROW(s.validate());
  CHECK_THROWS_AS(build_split_stream(train, test, {{0, 1}, {1, 2}}), std::invalid_argument);
}

TEST_CASE("permuted streams apply a fixed bijection per task") {
  Rng rng(3);
  LabeledDataset train = small_dataset(rng, 20, 16, 10), test = small_dataset(rng, 10, 16, 10);
  TaskStream s = build_permuted_stream(train, test, 4, 99);
  REQUIRE(s.tasks.size() == 4);
  CHECK(s.permuted);
  CHECK(s.tasks[0].train == train);
  CHECK(s.tasks[0].test == test);
  for (std::size_t t = 1; t < 4; ++t) {
    CHECK(s.tasks[t].train.labels == train.labels);
    const auto perm = task_permutation(16, t, 99);
    std::vector<std::size_t> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 16; ++i) CHECK(sorted[i] == i);
    for (std::size_t i = 0; i < train.size(); ++i) {
      std::vector<double> a(train.inputs.row(i).begin(), train.inputs.row(i).end());
      std::vector<double> b(s.tasks[t].train.inputs.row(i).begin(), s.tasks[t].train.inputs.row(i).end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }
  CHECK(task_permutation(16, 2, 99) != task_permutation(16, 3, 99));
  CHECK(build_permuted_stream(train, test, 4, 99).tasks[2].train == s.tasks[2].train);
  CHECK_THROWS_AS(build_permuted_stream(train, test, 0, 1), std::invalid_argument);
}

TEST_CASE("synthetic streams are deterministic with disjoint class sets") {
  SyntheticSpec spec;
  spec.n_tasks = 3;
  spec.classes_per_task = 2;
  spec.n_per_class = 50;
  TaskStream a = build_synthetic_stream(spec), b = build_synthetic_stream(spec);
  REQUIRE(a.tasks.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(a.tasks[t].train == b.tasks[t].train);
    CHECK(a.tasks[t].classes.size() == 2);
    CHECK(a.tasks[t].train.size() == 80);
    CHECK(a.tasks[t].test.size() == 20);
  }
  CHECK_NOTHROW(a.validate());
  spec.separation = 0.0;
  CHECK_THROWS_AS(build_synthetic_stream(spec), std::invalid_argument);
}

TEST_CASE("a linear classifier separates synthetic blobs at separation 10") {
  SyntheticSpec spec;
  spec.n_tasks = 2;
  spec.n_per_class = 200;
  TaskStream s = build_synthetic_stream(spec);
  for (const Task& task : s.tasks) {
    std::vector<std::vector<double>> means;
    for (int c : task.classes) {
      std::vector<double> m(task.train.dim(), 0.0);
      std::size_t n = 0;
      for (std::size_t i = 0; i < task.train.size(); ++i) {
        if (task.train.labels[i] != c) continue;
        for (std::size_t j = 0; j < m.size(); ++j) m[j] += task.train.inputs(i, j);
        ++n;
      }
      for (double& v : m) v /= static_cast<double>(n);
      means.push_back(m);
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < task.test.size(); ++i) {
      double best = 1e300;
      int pick = -1;
      for (std::size_t c = 0; c < means.size(); ++c) {
        double d = 0.0;
        for (std::size_t j = 0; j < means[c].size(); ++j) d += std::pow(task.test.inputs(i, j) - means[c][j], 2);
        if (d < best) best = d, pick = task.classes[c];
      }
      correct += pick == task.test.labels[i];
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(task.test.size()) >= 0.99);
  }
}

TEST_CASE("subsample_per_class caps each class and keeps order") {
  Rng rng(4);
  LabeledDataset d = small_dataset(rng, 100, 3, 4);
  LabeledDataset s = subsample_per_class(d, 10, 7);
  CHECK(s.size() == 40);
  for (int c = 0; c < 4; ++c) CHECK(std::count(s.labels.begin(), s.labels.end(), c) == 10);
  CHECK(subsample_per_class(d, 10, 7) == s);
  CHECK(subsample_per_class(d, 1000, 7) == d);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    while (pos < d.size() && d.inputs.row(pos)[0] != s.inputs.row(i)[0]) ++pos;
    CHECK(pos < d.size());
  }
}

TEST_CASE("task streams reject heterogeneous input widths") {
  TaskStream s;
  Task a, b;
  a.train = LabeledDataset(Matrix(1, 3), {0});
  a.classes = {0};
  b.id = 1;
  b.train = LabeledDataset(Matrix(1, 4), {1});
  b.classes = {1};
  s.tasks = {a, b};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("bundled MNIST subset loads with pixels in [0, 1]") {
  const fs::path dir = PROGBNN_TEST_DATA_DIR;
  if (!fs::exists(dir / "train-images-idx3-ubyte")) return;
  LabeledDataset d = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  CHECK(d.dim() == 784);
  CHECK(d.class_set.size() == 10);
  CHECK(*std::min_element(d.inputs.values().begin(), d.inputs.values().end()) >= 0.0);
  CHECK(*std::max_element(d.inputs.values().begin(), d.inputs.values().end()) <= 1.0);
}
