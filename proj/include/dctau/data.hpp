/*
 * Copyright 2026 The dctau Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Synthetic open-set data: Gaussian blobs, known/unknown splits, batch
// sampling and Gaussian jitter augmentation. Also the CSV dataset format.

#ifndef DCTAU_DATA_HPP_
#define DCTAU_DATA_HPP_

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dctau/common.hpp"

namespace dctau {

class UnsatisfiableBatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct Dataset {
  Matrix features;
  Labels labels;  // 1..class_count; kUnknownLabel only in exported unknown sets
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  Eigen::Index dim() const { return features.cols(); }
};

struct OpenSplit {
  Dataset train;         // known classes relabeled 1..K
  Dataset test_known;    // same relabeling as train
  Dataset test_unknown;  // every label is kUnknownLabel
  std::vector<int> known_ids;    // sorted original ids; known_ids[k-1] -> label k
  std::vector<int> unknown_ids;  // sorted original ids

  int known_count() const { return static_cast<int>(known_ids.size()); }
};

struct Batch {
  Matrix features;
  Labels labels;
  std::vector<int> present_classes;  // sorted distinct labels

  std::size_t size() const { return labels.size(); }
  int class_count_present() const { return static_cast<int>(present_classes.size()); }
};

inline std::vector<int> distinct_labels(const Labels& labels) {
  std::set<int> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

inline void validate_dataset(const Dataset& ds) {
  require(ds.class_count >= 1, "dataset: class_count must be >= 1");
  require(ds.features.cols() >= 1, "dataset: dimensionality must be >= 1");
  require(static_cast<std::size_t>(ds.features.rows()) == ds.labels.size(),
          "dataset: row/label count mismatch");
  std::vector<int> seen(static_cast<std::size_t>(ds.class_count) + 1, 0);
  for (int y : ds.labels) {
    require(y >= 1 && y <= ds.class_count, "dataset: label out of range");
    seen[static_cast<std::size_t>(y)] = 1;
  }
  for (int c = 1; c <= ds.class_count; ++c) {
    require(seen[static_cast<std::size_t>(c)] != 0,
            "dataset: class " + std::to_string(c) + " has no rows");
  }
}

inline Batch make_batch(const Matrix& features, Labels labels) {
  Batch b;
  b.features = features;
  b.present_classes = distinct_labels(labels);
  b.labels = std::move(labels);
  return b;
}

inline Batch gather_batch(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Labels labels;
  labels.reserve(rows.size());
  for (std::size_t r : rows) labels.push_back(ds.labels[r]);
  return make_batch(gather_rows(ds.features, rows), std::move(labels));
}

// Class centers of a blob dataset. Coordinates are uniform in
// [-kBlobCenterBox, kBlobCenterBox], drawn from a generator seeded only by
// `seed`, so centers do not depend on per_class or spread.
inline constexpr double kBlobCenterBox = 4.0;

inline Matrix blob_centers(int class_count, int dim, std::uint64_t seed) {
  require(class_count >= 1 && dim >= 1, "blob_centers: non-positive argument");
  Rng rng(seed);
  std::uniform_real_distribution<double> box(-kBlobCenterBox, kBlobCenterBox);
  Matrix centers(class_count, dim);
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    for (Eigen::Index j = 0; j < centers.cols(); ++j) centers(c, j) = box(rng);
  }
  return centers;
}

inline Dataset generate_blobs(int class_count, int per_class, int dim, double spread,
                              std::uint64_t seed) {
  require(class_count >= 2, "generate_blobs: class_count must be >= 2");
  require(per_class >= 1, "generate_blobs: per_class must be >= 1");
  require(dim >= 2, "generate_blobs: dim must be >= 2");
  require(std::isfinite(spread) && spread >= 0.0, "generate_blobs: spread must be >= 0");

  const Matrix centers = blob_centers(class_count, dim, seed);
  // Separate stream for the noise so centers stay fixed across sizes.
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);

  Dataset ds;
  ds.class_count = class_count;
  ds.features.resize(static_cast<Eigen::Index>(class_count) * per_class, dim);
  ds.labels.reserve(static_cast<std::size_t>(class_count) * per_class);
  Eigen::Index row = 0;
  for (int c = 0; c < class_count; ++c) {
    for (int i = 0; i < per_class; ++i, ++row) {
      for (int j = 0; j < dim; ++j) {
        ds.features(row, j) = centers(c, j) + spread * normal(rng);
      }
      ds.labels.push_back(c + 1);
    }
  }
  return ds;
}

inline OpenSplit split_open_set(const Dataset& ds, const std::vector<int>& known_ids,
                                double test_fraction, std::uint64_t seed) {
  validate_dataset(ds);
  require(test_fraction > 0.0 && test_fraction < 1.0,
          "split_open_set: test_fraction must be in (0,1)");
  std::set<int> known(known_ids.begin(), known_ids.end());
  require(!known.empty(), "split_open_set: known_ids is empty");
  require(known.size() == known_ids.size(), "split_open_set: duplicate known id");
  for (int id : known) {
    require(id >= 1 && id <= ds.class_count, "split_open_set: known id out of range");
  }
  require(static_cast<int>(known.size()) < ds.class_count,
          "split_open_set: known_ids must be a strict subset of the classes");

  OpenSplit split;
  split.known_ids.assign(known.begin(), known.end());
  std::map<int, int> remap;
  for (std::size_t k = 0; k < split.known_ids.size(); ++k) {
    remap[split.known_ids[k]] = static_cast<int>(k) + 1;
  }
  for (int c = 1; c <= ds.class_count; ++c) {
    if (!known.count(c)) split.unknown_ids.push_back(c);
  }

  Rng rng(seed);
  std::vector<std::size_t> train_rows, test_rows, unknown_rows;
  for (int id : split.known_ids) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < ds.size(); ++r) {
      if (ds.labels[r] == id) rows.push_back(r);
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::floor(static_cast<double>(rows.size()) * test_fraction));
    std::vector<std::size_t> test(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
    std::sort(test.begin(), test.end());
    std::sort(train.begin(), train.end());
    test_rows.insert(test_rows.end(), test.begin(), test.end());
    train_rows.insert(train_rows.end(), train.begin(), train.end());
  }
  for (std::size_t r = 0; r < ds.size(); ++r) {
    if (!known.count(ds.labels[r])) unknown_rows.push_back(r);
  }

  auto take = [&](const std::vector<std::size_t>& rows, bool unknown) {
    Dataset out;
    out.features = gather_rows(ds.features, rows);
    out.class_count = split.known_count();
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) {
      out.labels.push_back(unknown ? kUnknownLabel : remap.at(ds.labels[r]));
    }
    return out;
  };
  split.train = take(train_rows, false);
  split.test_known = take(test_rows, false);
  split.test_unknown = take(unknown_rows, true);
  return split;
}

// Picks `count` distinct class ids from 1..class_count, returned sorted.
inline std::vector<int> choose_known_ids(int class_count, int count, std::uint64_t seed) {
  require(count >= 1 && count < class_count, "choose_known_ids: need 1 <= count < class_count");
  std::vector<int> ids(static_cast<std::size_t>(class_count));
  std::iota(ids.begin(), ids.end(), 1);
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline constexpr std::size_t kDefaultBatchSize = 128;
inline constexpr int kBatchRetries = 32;

namespace detail {
inline bool single_class(const Dataset& ds, const std::vector<std::size_t>& rows,
                         std::size_t begin, std::size_t end) {
  for (std::size_t i = begin + 1; i < end; ++i) {
    if (ds.labels[rows[i]] != ds.labels[rows[begin]]) return false;
  }
  return true;
}
}  // namespace detail

// One uniformly drawn batch without replacement; redraws while the batch
// holds a single class.
inline Batch sample_batch(const Dataset& train, std::size_t batch_size, Rng& rng) {
  require(batch_size >= 2, "sample_batch: batch_size must be >= 2");
  require(batch_size <= train.size(), "sample_batch: batch_size exceeds dataset size");
  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (int attempt = 0; attempt < kBatchRetries; ++attempt) {
    // Partial Fisher-Yates: the first batch_size entries are a uniform draw.
    for (std::size_t i = 0; i < batch_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
      std::swap(rows[i], rows[pick(rng)]);
    }
    if (!detail::single_class(train, rows, 0, batch_size)) {
      return gather_batch(train, {rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(batch_size)});
    }
  }
  throw UnsatisfiableBatch("sample_batch: could not draw a batch with >= 2 classes");
}

// Row indices for one epoch: a permutation cut into batches of batch_size,
// every row visited exactly once. A chunk holding a single class is redrawn
// from the not-yet-assigned pool; a trailing chunk that is too small or
// still single-class is merged into its predecessor.
inline std::vector<std::vector<std::size_t>> epoch_batches(const Dataset& train,
                                                           std::size_t batch_size, Rng& rng) {
  require(batch_size >= 2, "epoch_batches: batch_size must be >= 2");
  require(train.size() >= 2, "epoch_batches: dataset needs >= 2 rows");
  if (distinct_labels(train.labels).size() < 2) {
    throw UnsatisfiableBatch("epoch_batches: dataset holds a single class");
  }
  batch_size = std::min(batch_size, train.size());
  std::vector<std::size_t> rows(train.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::shuffle(rows.begin(), rows.end(), rng);

  std::vector<std::vector<std::size_t>> batches;
  std::size_t begin = 0;
  while (begin < rows.size()) {
    std::size_t end = std::min(begin + batch_size, rows.size());
    for (int attempt = 0; attempt < kBatchRetries && detail::single_class(train, rows, begin, end);
         ++attempt) {
      std::shuffle(rows.begin() + static_cast<std::ptrdiff_t>(begin), rows.end(), rng);
    }
    std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                   rows.begin() + static_cast<std::ptrdiff_t>(end));
    const bool degenerate = chunk.size() < 2 || detail::single_class(train, rows, begin, end);
    if (degenerate && !batches.empty()) {
      batches.back().insert(batches.back().end(), chunk.begin(), chunk.end());
    } else {
      batches.push_back(std::move(chunk));
    }
    begin = end;
  }
  return batches;
}

// Adds i.i.d. N(0, sigma^2) noise to every feature. sigma == 0 is an exact copy.
inline Batch augment_gaussian(const Batch& batch, double sigma, Rng& rng) {
  require(std::isfinite(sigma) && sigma >= 0.0, "augment_gaussian: sigma must be >= 0");
  Batch out = batch;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (Eigen::Index i = 0; i < out.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.features.cols(); ++j) out.features(i, j) += noise(rng);
  }
  return out;
}

// Two independently augmented views stacked, labels repeated.
inline Batch augment_two_views(const Batch& batch, double sigma, Rng& rng) {
  Batch first = augment_gaussian(batch, sigma, rng);
  Batch second = augment_gaussian(batch, sigma, rng);
  Labels labels = first.labels;
  labels.insert(labels.end(), second.labels.begin(), second.labels.end());
  return make_batch(stack_rows(first.features, second.features), std::move(labels));
}

// ---- CSV: header f0,...,f{d-1},label; LF endings ----

inline void write_csv(std::ostream& out, const Matrix& features, const Labels& labels) {
  require(static_cast<std::size_t>(features.rows()) == labels.size(), "write_csv: row mismatch");
  for (Eigen::Index j = 0; j < features.cols(); ++j) out << 'f' << j << ',';
  out << "label\n";
  std::ostringstream line;
  line.precision(17);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    line.str({});
    for (Eigen::Index j = 0; j < features.cols(); ++j) line << features(i, j) << ',';
    line << labels[static_cast<std::size_t>(i)] << '\n';
    out << line.str();
  }
}

inline void write_csv_file(const std::string& path, const Matrix& features, const Labels& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_csv(out, features, labels);
  if (!out) throw IoError("write failed: " + path);
}

// Reads a dataset CSV. class_count is set to the largest label seen.
inline Dataset read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty csv: " + path);
  const auto cols = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
  if (cols < 1) throw IoError("csv header has no feature columns: " + path);

  std::vector<double> values;
  Dataset ds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!std::getline(fields, cell, ',')) throw IoError("short csv row in " + path);
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("bad number '" + cell + "' in " + path);
      }
    }
    if (!std::getline(fields, cell)) throw IoError("missing label in " + path);
    try {
      ds.labels.push_back(std::stoi(cell));
    } catch (const std::exception&) {
      throw IoError("bad label '" + cell + "' in " + path);
    }
  }
  const auto n = static_cast<Eigen::Index>(ds.labels.size());
  ds.features = Eigen::Map<Matrix>(values.data(), n, cols);
  ds.class_count = ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end());
  return ds;
}

}  // namespace dctau

#endif  // DCTAU_DATA_HPP_
