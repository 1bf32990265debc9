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

#include "progbnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace progbnn {

LabeledDataset::LabeledDataset(Matrix inputs_, std::vector<int> labels_)
    : inputs(std::move(inputs_)), labels(std::move(labels_)) {
  if (inputs.rows() != labels.size())
    throw std::invalid_argument("LabeledDataset: " + std::to_string(inputs.rows()) + " rows but " +
                                std::to_string(labels.size()) + " labels");
  std::set<int> unique(labels.begin(), labels.end());
  class_set.assign(unique.begin(), unique.end());
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<int> sub_labels;
  sub_labels.reserve(indices.size());
  for (std::size_t i : indices) sub_labels.push_back(labels.at(i));
  return LabeledDataset(inputs.gather_rows(indices), std::move(sub_labels));
}

std::vector<double> LabeledDataset::mean_input() const {
  std::vector<double> mean(dim(), 0.0);
  if (size() == 0) return mean;
  for (std::size_t r = 0; r < inputs.rows(); ++r) {
    auto row = inputs.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(size());
  return mean;
}

LabeledDataset concatenate(std::span<const LabeledDataset> parts) {
  std::size_t rows = 0;
  std::size_t dim = 0;
  bool have_dim = false;
  for (const auto& p : parts) {
    if (p.size() == 0) continue;
    if (have_dim && p.dim() != dim) throw std::invalid_argument("concatenate: input widths differ");
    dim = p.dim();
    have_dim = true;
    rows += p.size();
  }
  std::vector<double> values;
  values.reserve(rows * dim);
  std::vector<int> labels;
  labels.reserve(rows);
  for (const auto& p : parts) {
    if (p.size() == 0) continue;
    values.insert(values.end(), p.inputs.values().begin(), p.inputs.values().end());
    labels.insert(labels.end(), p.labels.begin(), p.labels.end());
  }
  return LabeledDataset(Matrix(rows, dim, std::move(values)), std::move(labels));
}

std::size_t TaskStream::input_dim() const { return tasks.empty() ? 0 : tasks.front().train.dim(); }

void TaskStream::validate() const {
  if (tasks.empty()) throw std::invalid_argument("task stream is empty");
  const std::size_t dim = input_dim();
  std::set<int> seen;
  for (const auto& t : tasks) {
    if (t.train.dim() != dim || (t.test.size() > 0 && t.test.dim() != dim))
      throw std::invalid_argument("task " + std::to_string(t.id + 1) +
                                  " has a different input width; heterogeneous inputs are not supported");
    if (permuted) continue;
    for (int c : t.classes)
      if (!seen.insert(c).second)
        throw std::invalid_argument("class " + std::to_string(c) + " appears in more than one task");
  }
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IdxTruncatedError(what + ": truncated header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("cannot open " + path.string());
  return in;
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::ifstream img = open_input(images);
  const std::string img_name = images.filename().string();
  const std::uint32_t img_magic = read_be32(img, img_name);
  if (img_magic != kIdxImagesMagic)
    throw IdxMagicError(img_name + ": expected image magic " + hex(kIdxImagesMagic) + ", found " + hex(img_magic));
  const std::uint32_t n_images = read_be32(img, img_name);
  const std::uint32_t rows = read_be32(img, img_name);
  const std::uint32_t cols = read_be32(img, img_name);

  std::ifstream lab = open_input(labels);
  const std::string lab_name = labels.filename().string();
  const std::uint32_t lab_magic = read_be32(lab, lab_name);
  if (lab_magic != kIdxLabelsMagic)
    throw IdxMagicError(lab_name + ": expected label magic " + hex(kIdxLabelsMagic) + ", found " + hex(lab_magic));
  const std::uint32_t n_labels = read_be32(lab, lab_name);
  if (n_images != n_labels)
    throw IdxCountMismatchError("image count " + std::to_string(n_images) + " != label count " +
                                std::to_string(n_labels));

  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> pixels(static_cast<std::size_t>(n_images) * dim);
  if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
    throw IdxTruncatedError(img_name + ": truncated pixel data");
  std::vector<unsigned char> raw_labels(n_labels);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(raw_labels.size())))
    throw IdxTruncatedError(lab_name + ": truncated label data");

  std::vector<double> values(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) values[i] = pixels[i] / 255.0;
  std::vector<int> label_ids(raw_labels.begin(), raw_labels.end());
  return LabeledDataset(Matrix(n_images, dim, std::move(values)), std::move(label_ids));
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const LabeledDataset& data) {
  const auto side = static_cast<std::uint32_t>(std::llround(std::sqrt(static_cast<double>(data.dim()))));
  if (static_cast<std::size_t>(side) * side != data.dim())
    throw std::invalid_argument("write_idx: input width is not a square image");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw IdxError("write_idx: cannot open output files");
  write_be32(img, kIdxImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(data.size()));
  write_be32(img, side);
  write_be32(img, side);
  for (double v : data.inputs.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("write_idx: pixel outside [0, 1]");
    img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  write_be32(lab, kIdxLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (int l : data.labels) {
    if (l < 0 || l > 255) throw std::invalid_argument("write_idx: label outside [0, 255]");
    lab.put(static_cast<char>(static_cast<unsigned char>(l)));
  }
}

std::vector<std::vector<int>> default_mnist_groups() { return {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}}; }

namespace {

LabeledDataset filter_classes(const LabeledDataset& data, const std::vector<int>& classes) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (std::find(classes.begin(), classes.end(), data.labels[i]) != classes.end()) keep.push_back(i);
  if (keep.empty()) return LabeledDataset(Matrix(0, data.dim()), {});
  return data.subset(keep);
}

}  // namespace

TaskStream build_split_stream(const LabeledDataset& train, const LabeledDataset& test,
                              const std::vector<std::vector<int>>& groups) {
  std::set<int> seen;
  for (const auto& group : groups)
    for (int c : group)
      if (!seen.insert(c).second)
        throw std::invalid_argument("build_split_stream: class " + std::to_string(c) + " is in more than one group");
  TaskStream stream;
  for (std::size_t t = 0; t < groups.size(); ++t) {
    Task task;
    task.id = static_cast<int>(t);
    task.classes = groups[t];
    task.train = filter_classes(train, groups[t]);
    task.test = filter_classes(test, groups[t]);
    for (int c : groups[t])
      if (std::find(task.train.class_set.begin(), task.train.class_set.end(), c) == task.train.class_set.end())
        throw std::invalid_argument("build_split_stream: class " + std::to_string(c) + " has no training samples");
    stream.tasks.push_back(std::move(task));
  }
  stream.validate();
  return stream;
}

std::vector<std::size_t> task_permutation(std::size_t dim, std::size_t task, std::uint64_t seed) {
  std::vector<std::size_t> perm(dim);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (task == 0) return perm;
  Rng rng = Rng(seed).fork(task);
  rng.shuffle(perm);
  return perm;
}

namespace {

LabeledDataset permute_pixels(const LabeledDataset& data, const std::vector<std::size_t>& perm) {
  Matrix out(data.inputs.rows(), data.inputs.cols());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto src = data.inputs.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < perm.size(); ++j) dst[j] = src[perm[j]];
  }
  return LabeledDataset(std::move(out), data.labels);
}

}  // namespace

TaskStream build_permuted_stream(const LabeledDataset& train, const LabeledDataset& test,
                                 std::size_t n_tasks, std::uint64_t seed) {
  if (n_tasks == 0) throw std::invalid_argument("build_permuted_stream: n_tasks must be >= 1");
  if (test.size() > 0 && test.dim() != train.dim())
    throw std::invalid_argument("build_permuted_stream: train and test widths differ");
  TaskStream stream;
  stream.permuted = true;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    const auto perm = task_permutation(train.dim(), t, seed);
    Task task;
    task.id = static_cast<int>(t);
    task.train = t == 0 ? train : permute_pixels(train, perm);
    task.test = t == 0 ? test : permute_pixels(test, perm);
    task.classes = train.class_set;
    stream.tasks.push_back(std::move(task));
  }
  stream.validate();
  return stream;
}

namespace {

double task_distance_sq(const std::vector<double>& a, const std::vector<double>& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return sq;
}

}  // namespace

TaskStream build_synthetic_stream(const SyntheticSpec& spec) {
  if (!(spec.separation > 0.0)) throw std::invalid_argument("build_synthetic_stream: separation must be > 0");
  if (spec.n_tasks == 0 || spec.classes_per_task == 0 || spec.dim == 0 || spec.n_per_class == 0)
    throw std::invalid_argument("build_synthetic_stream: counts must be positive");
  const std::size_t n_classes = spec.n_tasks * spec.classes_per_task;
  Rng rng(spec.seed);

  // Scaled basis vectors are exactly `separation` apart; with fewer dims than
  // classes, fall back to rejection sampling in a box.
  std::vector<std::vector<double>> means;
  if (spec.dim >= n_classes) {
    const double scale = spec.separation / std::sqrt(2.0);
    for (std::size_t c = 0; c < n_classes; ++c) {
      std::vector<double> m(spec.dim, 0.0);
      m[c] = scale;
      means.push_back(std::move(m));
    }
  } else {
    const double box = spec.separation * std::max(1.0, std::cbrt(static_cast<double>(n_classes)));
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (int attempt = 0;; ++attempt) {
        if (attempt > 100000) throw std::runtime_error("build_synthetic_stream: cannot place class means");
        std::vector<double> m(spec.dim);
        for (double& v : m) v = (2.0 * rng.uniform() - 1.0) * box;
        bool ok = std::all_of(means.begin(), means.end(),
                              [&](const auto& other) { return task_distance_sq(m, other) >= spec.separation * spec.separation; });
        if (ok) {
          means.push_back(std::move(m));
          break;
        }
      }
    }
  }

  const std::size_t n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(spec.n_per_class)));
  TaskStream stream;
  for (std::size_t t = 0; t < spec.n_tasks; ++t) {
    std::vector<double> train_vals, test_vals;
    std::vector<int> train_labels, test_labels;
    Task task;
    task.id = static_cast<int>(t);
    for (std::size_t k = 0; k < spec.classes_per_task; ++k) {
      const int cls = static_cast<int>(t * spec.classes_per_task + k);
      task.classes.push_back(cls);
      for (std::size_t i = 0; i < spec.n_per_class; ++i) {
        auto& vals = i < n_train ? train_vals : test_vals;
        auto& labs = i < n_train ? train_labels : test_labels;
        for (std::size_t d = 0; d < spec.dim; ++d)
          vals.push_back(means[static_cast<std::size_t>(cls)][d] + spec.sigma * rng.normal());
        labs.push_back(cls);
      }
    }
    const std::size_t n_tr = train_labels.size();
    const std::size_t n_te = test_labels.size();
    task.train = LabeledDataset(Matrix(n_tr, spec.dim, std::move(train_vals)), std::move(train_labels));
    task.test = LabeledDataset(Matrix(n_te, spec.dim, std::move(test_vals)), std::move(test_labels));
    stream.tasks.push_back(std::move(task));
  }
  stream.validate();
  return stream;
}

LabeledDataset subsample_per_class(const LabeledDataset& data, std::size_t cap, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (auto& [cls, idx] : by_class) {
    if (idx.size() > cap) {
      rng.shuffle(idx);
      idx.resize(cap);
    }
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  return data.subset(keep);
}

}  // namespace progbnn
