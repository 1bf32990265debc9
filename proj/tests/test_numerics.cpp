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
#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "progbnn/numerics.hpp"
#include "support/generators.hpp"

using namespace progbnn;
using progbnn::testing::random_matrix;
using progbnn::testing::size_in;

TEST_CASE("matmul by identity returns the left operand") {
  Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(matmul(a, Matrix::identity(2)) == a);
  CHECK(matmul(Matrix::identity(2), Matrix::from_rows({{5}, {7}})) == Matrix::from_rows({{5}, {7}}));
}

TEST_CASE("matmul hand arithmetic") {
  Matrix r = matmul(Matrix::from_rows({{1, 2}, {3, 4}}), Matrix::from_rows({{1}, {1}}));
  CHECK(r == Matrix::from_rows({{3}, {7}}));
}

TEST_CASE("matmul rejects incompatible shapes and names both") {
  Matrix a(2, 3), b(2, 3);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("(2x3)"), std::invalid_argument);
  CHECK_THROWS_AS(matmul_transposed_b(a, Matrix(2, 4)), std::invalid_argument);
  CHECK_THROWS_AS(matmul_transposed_a(a, Matrix(3, 3)), std::invalid_argument);
}

TEST_CASE("transposed products agree with explicit transposes") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = size_in(rng, 1, 9), k = size_in(rng, 1, 9), n = size_in(rng, 1, 9);
    Matrix a = random_matrix(rng, m, k, -2, 2);
    Matrix b = random_matrix(rng, n, k, -2, 2);
    Matrix c = random_matrix(rng, m, n, -2, 2);
    Matrix ref = matmul(a, transpose(b));
    Matrix got = matmul_transposed_b(a, b);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(got.values()[i] == doctest::Approx(ref.values()[i]).epsilon(1e-12));
    Matrix ref2 = matmul(transpose(a), c);
    Matrix got2 = matmul_transposed_a(a, c);
    for (std::size_t i = 0; i < ref2.size(); ++i)
      CHECK(got2.values()[i] == doctest::Approx(ref2.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("matmul is associative on random triples within 1e-9 relative error") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = size_in(rng, 1, 6), k = size_in(rng, 1, 6), l = size_in(rng, 1, 6), n = size_in(rng, 1, 6);
    Matrix a = random_matrix(rng, m, k, -1, 1), b = random_matrix(rng, k, l, -1, 1), c = random_matrix(rng, l, n, -1, 1);
    Matrix left = matmul(matmul(a, b), c);
    Matrix right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) {
      const double scale = std::max(1.0, std::abs(left.values()[i]));
      CHECK(std::abs(left.values()[i] - right.values()[i]) / scale < 1e-9);
    }
  }
}

TEST_CASE("matrix construction validates data length") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), std::invalid_argument);
  Matrix m(3, 2, 1.5);
  CHECK(m.size() == 6);
  CHECK(m.all_finite());
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(m.all_finite());
}

TEST_CASE("row slicing and gathering") {
  Matrix m = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  CHECK(m.slice_rows(1, 2) == Matrix::from_rows({{3, 4}, {5, 6}}));
  std::vector<std::size_t> idx{2, 0};
  CHECK(m.gather_rows(idx) == Matrix::from_rows({{5, 6}, {1, 2}}));
  CHECK_THROWS_AS(m.slice_rows(2, 2), std::out_of_range);
}

TEST_CASE("sample_standard_normal is reproducible for a fixed seed") {
  Rng a(42), b(42);
  CHECK(sample_standard_normal(a, 2, 2) == sample_standard_normal(b, 2, 2));
}

TEST_CASE("sample_standard_normal moments over 1e5 draws") {
  Rng rng(2024);
  Matrix s = sample_standard_normal(rng, 1000, 100);
  double mean = 0.0;
  for (double v : s.values()) mean += v;
  mean /= static_cast<double>(s.size());
  double var = 0.0;
  for (double v : s.values()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(s.size() - 1);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rng streams are byte-identical for equal seeds and differ across forks") {
  Rng a(99), b(99);
  for (int i = 0; i < 10000; ++i) REQUIRE(a.next_u64() == b.next_u64());
  Rng base(5);
  Rng f1 = base.fork(1), f2 = base.fork(2), f1b = base.fork(1);
  CHECK(f1.next_u64() == f1b.next_u64());
  CHECK(f1.next_u64() != f2.next_u64());
}

TEST_CASE("uniform and uniform_index stay in range") {
  Rng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    const auto k = rng.uniform_index(7);
    REQUIRE(k < 7);
    seen.insert(k);
  }
  CHECK(seen.size() == 7);
  CHECK_THROWS_AS(rng.uniform_index(0), std::invalid_argument);
}

TEST_CASE("shuffle produces a permutation") {
  Rng rng(8);
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i;
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) CHECK(sorted[i] == i);
  CHECK(v != sorted);
}

TEST_CASE("log_softmax examples") {
  auto r = log_softmax(std::vector<double>{0.0, 0.0});
  CHECK(r[0] == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  auto big = log_softmax(std::vector<double>{1000.0, 0.0});
  CHECK(std::abs(big[0]) < 1e-12);
  CHECK(big[1] == doctest::Approx(-1000.0).epsilon(1e-12));
  auto three = log_softmax(std::vector<double>{1.0, 2.0, 3.0});
  double s = 0.0;
  for (double v : three) s += std::exp(v);
  CHECK(std::abs(s - 1.0) < 1e-12);
  CHECK_THROWS_AS(log_softmax(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("log_softmax is shift invariant and normalized on random vectors") {
  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = size_in(rng, 1, 12);
    std::vector<double> x(n);
    for (double& v : x) v = progbnn::testing::uniform_in(rng, -30, 30);
    const double c = progbnn::testing::uniform_in(rng, -100, 100);
    std::vector<double> shifted = x;
    for (double& v : shifted) v += c;
    auto a = log_softmax(x);
    auto b = log_softmax(shifted);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(a[i] - b[i]) < 1e-12);
      total += std::exp(a[i]);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("softmax_inplace sums to one") {
  std::vector<double> v{3.0, -1.0, 0.5};
  softmax_inplace(v);
  CHECK(v[0] + v[1] + v[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(v[0] > v[2]);
}

TEST_CASE("argmax breaks ties by lowest index") {
  CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
  CHECK(argmax(std::vector<double>{2.0, 2.0}) == 0);
  CHECK(argmax(std::vector<double>{-1.0}) == 0);
}

TEST_CASE("relu") {
  CHECK(relu(-2.0) == 0.0);
  CHECK(relu(0.0) == 0.0);
  CHECK(relu(1.5) == 1.5);
}
