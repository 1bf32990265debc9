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

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "progbnn/numerics.hpp"

namespace progbnn {

struct LabeledDataset {
  Matrix inputs;            // N x m, values in [0, 1] for image data
  std::vector<int> labels;  // class ids
  std::vector<int> class_set;

  LabeledDataset() = default;
  /// Computes class_set from labels; throws if row and label counts differ.
  LabeledDataset(Matrix inputs, std::vector<int> labels);

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.cols(); }
  LabeledDataset subset(std::span<const std::size_t> indices) const;
  std::vector<double> mean_input() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Concatenates datasets with equal input width.
LabeledDataset concatenate(std::span<const LabeledDataset> parts);

struct Task {
  int id = 0;  // 0-based position in the stream; also the multi-head head id
  LabeledDataset train;
  LabeledDataset test;
  std::vector<int> classes;
};

struct TaskStream {
  std::vector<Task> tasks;
  bool permuted = false;

  std::size_t input_dim() const;
  /// Rejects heterogeneous input widths and, for split streams, overlapping
  /// class sets.
  void validate() const;
};

// IDX errors are distinct types so callers can tell them apart.
struct IdxError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IdxMagicError : IdxError {
  using IdxError::IdxError;
};
struct IdxTruncatedError : IdxError {
  using IdxError::IdxError;
};
struct IdxCountMismatchError : IdxError {
  using IdxError::IdxError;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Reads an IDX image file (unsigned bytes, rank 3) and label file (rank 1).
/// Pixels are divided by 255.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
/// Inverse of load_idx for square images; pixel values are round(v * 255).
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const LabeledDataset& data);

std::vector<std::vector<int>> default_mnist_groups();

TaskStream build_split_stream(const LabeledDataset& train, const LabeledDataset& test,
                              const std::vector<std::vector<int>>& groups);

/// Task 0 uses the identity permutation, later tasks a seed-derived fixed
/// pixel permutation shared by train and test.
TaskStream build_permuted_stream(const LabeledDataset& train, const LabeledDataset& test,
                                 std::size_t n_tasks, std::uint64_t seed);
std::vector<std::size_t> task_permutation(std::size_t dim, std::size_t task, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n_tasks = 5;
  std::size_t classes_per_task = 2;
  std::size_t dim = 10;
  double separation = 10.0;
  double sigma = 1.0;
  std::size_t n_per_class = 100;
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian blobs, one per class, with disjoint class ids per task
/// and a deterministic 80/20 train/test split.
TaskStream build_synthetic_stream(const SyntheticSpec& spec);

/// Keeps at most `cap` samples of each class, chosen with a seeded shuffle;
/// the original order of the survivors is preserved.
LabeledDataset subsample_per_class(const LabeledDataset& data, std::size_t cap, std::uint64_t seed);

}  // namespace progbnn
