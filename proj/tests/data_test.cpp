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

#include "dctau/data.hpp"

#include <filesystem>
#include <set>

#include "gtest/gtest.h"

namespace dctau {
namespace {

TEST(GenerateBlobs, ZeroSpreadPutsRowsOnCenters) {
  const Dataset ds = generate_blobs(2, 1, 2, 0.0, 7);
  const Matrix centers = blob_centers(2, 2, 7);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.features, centers);
  EXPECT_EQ(ds.labels, (Labels{1, 2}));
}

TEST(GenerateBlobs, CountsPerClass) {
  const Dataset ds = generate_blobs(10, 50, 8, 1.0, 3);
  ASSERT_EQ(ds.size(), 500u);
  std::vector<int> counts(11, 0);
  for (int y : ds.labels) ++counts[static_cast<std::size_t>(y)];
  for (int c = 1; c <= 10; ++c) EXPECT_EQ(counts[static_cast<std::size_t>(c)], 50);
  validate_dataset(ds);
}

TEST(GenerateBlobs, SampleMeansNearCentersViaCsv) {
  // Round-trip through the CSV and recompute the means from the file.
  const Dataset ds = generate_blobs(3, 100, 2, 0.5, 1);
  const auto path = std::filesystem::temp_directory_path() / "dctau_blobs_test.csv";
  write_csv_file(path.string(), ds.features, ds.labels);
  const Dataset back = read_csv_file(path.string());
  std::filesystem::remove(path);
  const Matrix centers = blob_centers(3, 2, 1);
  for (int c = 1; c <= 3; ++c) {
    RowVector mean = RowVector::Zero(2);
    int n = 0;
    for (std::size_t r = 0; r < back.size(); ++r) {
      if (back.labels[r] == c) {
        mean += back.features.row(static_cast<Eigen::Index>(r));
        ++n;
      }
    }
    mean /= n;
    EXPECT_LT((mean - centers.row(c - 1)).cwiseAbs().maxCoeff(), 0.2) << "class " << c;
  }
}

TEST(GenerateBlobs, DeterministicUnderSeed) {
  const Dataset a = generate_blobs(4, 20, 3, 1.0, 11);
  const Dataset b = generate_blobs(4, 20, 3, 1.0, 11);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.features, generate_blobs(4, 20, 3, 1.0, 12).features);
}

TEST(GenerateBlobs, RejectsBadArguments) {
  EXPECT_THROW(generate_blobs(1, 10, 2, 1.0, 1), InvalidArgument);
  EXPECT_THROW(generate_blobs(2, 0, 2, 1.0, 1), InvalidArgument);
  EXPECT_THROW(generate_blobs(2, 10, 1, 1.0, 1), InvalidArgument);
  EXPECT_THROW(generate_blobs(2, 10, 2, -1.0, 1), InvalidArgument);
}

TEST(SplitOpenSet, SixKnownOfTen) {
  const Dataset ds = generate_blobs(10, 30, 4, 1.0, 5);
  const OpenSplit split = split_open_set(ds, {2, 3, 5, 7, 8, 10}, 0.3, 9);
  EXPECT_EQ(distinct_labels(split.train.labels), (std::vector<int>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(distinct_labels(split.test_known.labels), (std::vector<int>{1, 2, 3, 4, 5, 6}));
  EXPECT_GT(split.test_unknown.size(), 0u);
  for (int y : split.test_unknown.labels) EXPECT_EQ(y, kUnknownLabel);
  EXPECT_EQ(split.train.size() + split.test_known.size() + split.test_unknown.size(), ds.size());
  EXPECT_EQ(split.unknown_ids, (std::vector<int>{1, 4, 6, 9}));
}

TEST(SplitOpenSet, RemapIsOrderPreservingAndShared) {
  const Dataset ds = generate_blobs(5, 10, 2, 0.0, 2);
  const OpenSplit split = split_open_set(ds, {4, 2}, 0.5, 1);
  EXPECT_EQ(split.known_ids, (std::vector<int>{2, 4}));
  // With zero spread each row sits on its center: label k must map to original id known_ids[k-1].
  const Matrix centers = blob_centers(5, 2, 2);
  for (const Dataset* part : {&split.train, &split.test_known}) {
    for (std::size_t r = 0; r < part->size(); ++r) {
      const int original = split.known_ids[static_cast<std::size_t>(part->labels[r] - 1)];
      EXPECT_EQ(part->features.row(static_cast<Eigen::Index>(r)), centers.row(original - 1));
    }
  }
}

TEST(SplitOpenSet, FloorOnTestRemainderToTrain) {
  const Dataset even = generate_blobs(3, 100, 2, 1.0, 4);
  const OpenSplit a = split_open_set(even, {1, 2}, 0.5, 3);
  EXPECT_EQ(a.train.size(), 100u);
  EXPECT_EQ(a.test_known.size(), 100u);
  const Dataset odd = generate_blobs(3, 7, 2, 1.0, 4);
  const OpenSplit b = split_open_set(odd, {1}, 0.5, 3);
  EXPECT_EQ(b.test_known.size(), 3u);
  EXPECT_EQ(b.train.size(), 4u);
}

TEST(SplitOpenSet, DeterministicUnderSeed) {
  const Dataset ds = generate_blobs(6, 40, 3, 1.0, 8);
  const OpenSplit a = split_open_set(ds, {1, 2, 3}, 0.25, 77);
  const OpenSplit b = split_open_set(ds, {1, 2, 3}, 0.25, 77);
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_EQ(a.test_known.features, b.test_known.features);
}

TEST(SplitOpenSet, RejectsEmptyOrFullKnownSet) {
  const Dataset ds = generate_blobs(3, 5, 2, 1.0, 1);
  EXPECT_THROW(split_open_set(ds, {}, 0.5, 1), InvalidArgument);
  EXPECT_THROW(split_open_set(ds, {1, 2, 3}, 0.5, 1), InvalidArgument);
  EXPECT_THROW(split_open_set(ds, {1}, 1.0, 1), InvalidArgument);
}

TEST(SampleBatch, FullSizeBatchHoldsEveryRowOnce) {
  const Dataset ds = generate_blobs(3, 5, 2, 1.0, 1);
  Rng rng(4);
  const Batch b = sample_batch(ds, ds.size(), rng);
  // Match rows back to the dataset.
  std::multiset<double> drawn, all;
  for (Eigen::Index i = 0; i < b.features.rows(); ++i) drawn.insert(b.features(i, 0));
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) all.insert(ds.features(i, 0));
  EXPECT_EQ(drawn, all);
  EXPECT_EQ(b.present_classes, (std::vector<int>{1, 2, 3}));
}

TEST(SampleBatch, DefaultSizeAndTwoClassesAcrossSeeds) {
  EXPECT_EQ(kDefaultBatchSize, 128u);
  const Dataset ds = generate_blobs(6, 100, 4, 1.0, 2);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    for (int i = 0; i < 20; ++i) {
      const Batch b = sample_batch(ds, kDefaultBatchSize, rng);
      EXPECT_EQ(b.size(), kDefaultBatchSize);
      EXPECT_GE(b.class_count_present(), 2);
      EXPECT_EQ(b.present_classes, distinct_labels(b.labels));
    }
  }
}

TEST(SampleBatch, SingleClassDatasetIsUnsatisfiable) {
  Dataset ds;
  ds.features = Matrix::Random(10, 2);
  ds.labels.assign(10, 1);
  ds.class_count = 1;
  Rng rng(1);
  EXPECT_THROW(sample_batch(ds, 4, rng), UnsatisfiableBatch);
  EXPECT_THROW(epoch_batches(ds, 4, rng), UnsatisfiableBatch);
}

TEST(EpochBatches, VisitsEveryRowExactlyOnce) {
  for (std::size_t batch : {2u, 7u, 16u, 128u}) {
    const Dataset ds = generate_blobs(3, 17, 2, 1.0, batch);
    Rng rng(batch);
    const auto batches = epoch_batches(ds, batch, rng);
    std::vector<int> seen(ds.size(), 0);
    for (const auto& b : batches) {
      EXPECT_GE(b.size(), 2u);
      std::set<int> classes;
      for (std::size_t r : b) {
        ++seen[r];
        classes.insert(ds.labels[r]);
      }
      EXPECT_GE(classes.size(), 2u);
    }
    for (int s : seen) EXPECT_EQ(s, 1);
  }
}

TEST(AugmentGaussian, ZeroSigmaIsBitwiseIdentity) {
  const Dataset ds = generate_blobs(2, 5, 3, 1.0, 1);
  const Batch b = gather_batch(ds, {0, 1, 5, 6});
  Rng rng(1);
  const Batch out = augment_gaussian(b, 0.0, rng);
  EXPECT_EQ(std::memcmp(out.features.data(), b.features.data(), sizeof(double) * 12), 0);
  EXPECT_EQ(out.labels, b.labels);
}

TEST(AugmentGaussian, NoiseStdMatchesSigma) {
  Batch b = make_batch(Matrix::Zero(10000, 3), Labels(10000, 1));
  Rng rng(5);
  const Batch out = augment_gaussian(b, 0.1, rng);
  EXPECT_EQ(out.labels, b.labels);
  const Matrix noise = out.features - b.features;
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double mean = noise.col(j).mean();
    const double sd = std::sqrt((noise.col(j).array() - mean).square().sum() / (noise.rows() - 1));
    EXPECT_NEAR(sd, 0.1, 0.005);
  }
  EXPECT_THROW(augment_gaussian(b, -0.1, rng), InvalidArgument);
}

TEST(AugmentGaussian, TwoViewsStackLabels) {
  const Batch b = make_batch(Matrix::Zero(3, 2), Labels{1, 2, 1});
  Rng rng(1);
  const Batch v = augment_two_views(b, 0.1, rng);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.labels, (Labels{1, 2, 1, 1, 2, 1}));
}

TEST(Csv, HeaderAndUnknownLabel) {
  std::ostringstream out;
  Matrix f(2, 2);
  f << 1.5, -2, 0.25, 3;
  write_csv(out, f, {kUnknownLabel, 3});
  EXPECT_EQ(out.str(), "f0,f1,label\n1.5,-2,0\n0.25,3,3\n");
}

}  // namespace
}  // namespace dctau
