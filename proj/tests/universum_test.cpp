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

#include "dctau/universum.hpp"

#include <algorithm>

#include "gtest/gtest.h"

namespace dctau {
namespace {

Batch two_d_batch() {
  Matrix f(3, 2);
  f << 1, 0,   //
      0, 1,    //
      -1, 0;
  return make_batch(f, {1, 2, 3});
}

TEST(MakeUniversum, DefaultLambda) { EXPECT_EQ(kDefaultLambda, 0.5); }

TEST(MakeUniversum, LambdaOneCopiesAnchors) {
  const Dataset ds = generate_blobs(4, 10, 3, 1.0, 2);
  const Batch b = gather_batch(ds, {0, 3, 12, 25, 33, 39});
  Rng rng(1);
  const UniversumBatch ub = make_universum(b, 4, 1.0, rng);
  EXPECT_EQ(ub.features, b.features);
  ASSERT_EQ(ub.size(), b.size());
  for (std::size_t r = 0; r < b.size(); ++r) EXPECT_EQ(ub.labels[r], b.labels[r] + 4);
}

TEST(MakeUniversum, TwoClassesReduceToPlainMixup) {
  Matrix f(4, 2);
  f << 1, 1,  //
      3, 1,   //
      -1, 5,  //
      -3, 7;
  const Batch b = make_batch(f, {1, 1, 2, 2});
  Rng rng(3);
  const UniversumBatch ub = make_universum(b, 2, 0.3, rng);
  for (Eigen::Index r = 0; r < 4; ++r) {
    // Partner must be one of the other class's rows.
    const Eigen::Index other0 = r < 2 ? 2 : 0;
    const RowVector m0 = 0.3 * f.row(r) + 0.7 * f.row(other0);
    const RowVector m1 = 0.3 * f.row(r) + 0.7 * f.row(other0 + 1);
    const bool hit = (ub.features.row(r) - m0).norm() < 1e-15 || (ub.features.row(r) - m1).norm() < 1e-15;
    EXPECT_TRUE(hit) << "row " << r;
  }
}

TEST(MakeUniversum, HandComputedThreeClassExample) {
  // x_i = (1,0); other-class draws (0,1) and (-1,0); lambda = 0.5 -> (0.25, 0.25).
  Rng rng(1);
  const UniversumBatch ub = make_universum(two_d_batch(), 3, 0.5, rng);
  EXPECT_NEAR(ub.features(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(ub.features(0, 1), 0.25, 1e-15);
  EXPECT_EQ(ub.labels, (Labels{4, 5, 6}));
  EXPECT_EQ(ub.source_labels, (Labels{1, 2, 3}));
}

TEST(MakeUniversum, RejectsSingleClassAndBadLambda) {
  const Batch one = make_batch(Matrix::Zero(3, 2), {2, 2, 2});
  Rng rng(1);
  EXPECT_THROW(make_universum(one, 2, 0.5, rng), InsufficientClasses);
  EXPECT_THROW(make_universum(two_d_batch(), 3, 1.5, rng), InvalidArgument);
  EXPECT_THROW(make_universum(two_d_batch(), 3, -0.1, rng), InvalidArgument);
}

// Property: the anchor dominates. |TAU - x_i| <= (1-lambda) max_j |x_j - x_i|
// over rows of other classes, and TAU lies in the bounding box of the batch.
TEST(MakeUniversum, TargetedDominanceAndHullProperty) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Dataset ds = generate_blobs(5, 8, 3, 2.0, seed);
    Rng rng(seed);
    const Batch b = sample_batch(ds, 16, rng);
    const double lambda = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const UniversumBatch ub = make_universum(b, 5, lambda, rng);
    const RowVector lo = b.features.colwise().minCoeff();
    const RowVector hi = b.features.colwise().maxCoeff();
    for (Eigen::Index r = 0; r < b.features.rows(); ++r) {
      double reach = 0.0;
      for (Eigen::Index j = 0; j < b.features.rows(); ++j) {
        if (b.labels[static_cast<std::size_t>(j)] != b.labels[static_cast<std::size_t>(r)]) {
          reach = std::max(reach, (b.features.row(j) - b.features.row(r)).norm());
        }
      }
      EXPECT_LE((ub.features.row(r) - b.features.row(r)).norm(), (1.0 - lambda) * reach + 1e-12);
      EXPECT_TRUE((ub.features.row(r).array() >= lo.array() - 1e-12).all());
      EXPECT_TRUE((ub.features.row(r).array() <= hi.array() + 1e-12).all());
    }
  }
}

TEST(MixupBaseline, ForcedLambdaEndpoints) {
  const Dataset ds = generate_blobs(3, 6, 2, 1.0, 4);
  const Batch b = gather_batch(ds, {0, 1, 6, 7, 12, 13});
  Rng rng(2);
  const MixupPair one = make_mixup_baseline(b, 1.0, rng, 1.0);
  const MixupPair zero = make_mixup_baseline(b, 1.0, rng, 0.0);
  for (std::size_t r = 0; r < b.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    EXPECT_EQ(one.features.row(i), b.features.row(static_cast<Eigen::Index>(one.first[r])));
    EXPECT_EQ(zero.features.row(i), b.features.row(static_cast<Eigen::Index>(zero.second[r])));
    EXPECT_NE(b.labels[zero.first[r]], b.labels[zero.second[r]]);
  }
  const Batch single = make_batch(Matrix::Zero(2, 2), {1, 1});
  EXPECT_THROW(make_mixup_baseline(single, 1.0, rng), InsufficientClasses);
}

// Kolmogorov-Smirnov against U(0,1) for alpha = 1; critical value at level
// 0.01 is 1.628 / sqrt(n).
TEST(MixupBaseline, BetaOneIsUniform) {
  const Dataset ds = generate_blobs(2, 5000, 2, 1.0, 9);
  Rng rng(10);
  const Batch b = gather_batch(ds, [&] {
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }());
  MixupPair m = make_mixup_baseline(b, 1.0, rng);
  std::sort(m.lambdas.begin(), m.lambdas.end());
  const double n = static_cast<double>(m.lambdas.size());
  double d = 0.0;
  for (std::size_t i = 0; i < m.lambdas.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - m.lambdas[i], m.lambdas[i] - static_cast<double>(i) / n});
  }
  EXPECT_LT(d, 1.628 / std::sqrt(n));
}

TEST(AssignPseudoLabels, SchemesAndIdempotence) {
  Rng rng(1);
  Matrix f(4, 2);
  f << 0, 0, 1, 1, 2, 2, 3, 3;
  const Batch b = make_batch(f, {3, 1, 6, 3});
  const UniversumBatch ub = make_universum(b, 6, 0.5, rng);
  const UniversumBatch kk = assign_pseudo_labels(ub, PseudoLabelScheme::kPlusK);
  EXPECT_EQ(kk.labels, (Labels{9, 7, 12, 9}));
  const UniversumBatch k1 = assign_pseudo_labels(ub, PseudoLabelScheme::kPlusOne);
  EXPECT_EQ(k1.labels, (Labels{7, 7, 7, 7}));
  EXPECT_EQ(assign_pseudo_labels(k1, PseudoLabelScheme::kPlusOne).labels, k1.labels);
  EXPECT_EQ(assign_pseudo_labels(kk, PseudoLabelScheme::kPlusK).labels, kk.labels);
  // Back from k_plus_one to k_plus_k restores the bijection.
  EXPECT_EQ(assign_pseudo_labels(k1, PseudoLabelScheme::kPlusK).labels, kk.labels);
}

TEST(AssignPseudoLabels, KPlusKIsBijection) {
  Rng rng(1);
  const Dataset ds = generate_blobs(6, 4, 2, 1.0, 1);
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const UniversumBatch ub = make_universum(gather_batch(ds, all), 6, 0.5, rng);
  std::set<int> pseudo(ub.labels.begin(), ub.labels.end());
  EXPECT_EQ(pseudo, (std::set<int>{7, 8, 9, 10, 11, 12}));
  for (std::size_t r = 0; r < ub.size(); ++r) EXPECT_EQ(ub.labels[r] - 6, ub.source_labels[r]);
}

}  // namespace
}  // namespace dctau
