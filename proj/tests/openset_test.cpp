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

#include "dctau/openset.hpp"

#include "gtest/gtest.h"

namespace dctau {
namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(values.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : values) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_EQ(kDefaultPercentile, 5.0);
  EXPECT_NEAR(percentile_linear({1.0, 0.8, 0.6, 0.4, 0.2}, 50.0), 0.6, 1e-15);
  EXPECT_NEAR(percentile_linear({0.2, 0.4}, 25.0), 0.25, 1e-15);
  EXPECT_EQ(percentile_linear({0.3, 0.3, 0.3}, 5.0), 0.3);
}

TEST(FitThresholds, PerClassFromCorrectRows) {
  const Matrix post = rows({{0.2, 0.8}, {0.4, 0.6}, {0.9, 0.1}, {0.7, 0.3}, {0.6, 0.4}, {0.55, 0.45}});
  const Labels labels{2, 2, 1, 1, 1, 2};  // last row misclassified
  const ThresholdTable t = fit_thresholds(post, labels, 50.0);
  EXPECT_NEAR(t.of(1), 0.7, 1e-15);
  EXPECT_NEAR(t.of(2), 0.7, 1e-15);
  const ThresholdTable all = fit_thresholds(post, labels, 50.0, ThresholdMode::kPerClass, ThresholdRows::kAll);
  EXPECT_NEAR(all.of(2), 0.6, 1e-15);
}

TEST(FitThresholds, ClassWithoutCorrectRowsUsesGlobal) {
  const Matrix post = rows({{0.9, 0.1, 0.0}, {0.8, 0.2, 0.0}, {0.6, 0.4, 0.0}});
  const ThresholdTable t = fit_thresholds(post, {1, 1, 2}, 50.0);
  EXPECT_NEAR(t.of(1), 0.85, 1e-15);
  EXPECT_NEAR(t.of(2), 0.85, 1e-15);
  EXPECT_NEAR(t.of(3), 0.85, 1e-15);
  const ThresholdTable g = fit_thresholds(post, {1, 1, 1}, 50.0, ThresholdMode::kGlobal);
  EXPECT_NEAR(g.of(1), 0.8, 1e-15);
}

TEST(FitThresholds, RejectsBadInputs) {
  const Matrix post = rows({{0.5, 0.5}});
  EXPECT_THROW(fit_thresholds(post, {1}, 0.0), InvalidArgument);
  EXPECT_THROW(fit_thresholds(post, {1}, 100.0), InvalidArgument);
  EXPECT_THROW(fit_thresholds(rows({{0.5, 0.6}}), {1}, 5.0), InvalidArgument);
  EXPECT_THROW(fit_thresholds(Matrix(1, 0), {1}, 5.0), InvalidArgument);
}

// As the percentile goes to 0 each threshold goes to the smallest correct
// confidence of its class, so no correctly classified training row is rejected.
TEST(FitThresholds, VanishingPercentileKeepsCorrectTrainingRows) {
  const Matrix post = rows({{0.9, 0.1}, {0.7, 0.3}, {0.2, 0.8}, {0.35, 0.65}});
  const Labels labels{1, 1, 2, 2};
  double last_gap = 1.0;
  for (double p : {1.0, 1e-3, 1e-6, 1e-9}) {
    const ThresholdTable t = fit_thresholds(post, labels, p);
    const double gap = std::max(t.of(1) - 0.7, t.of(2) - 0.65);
    EXPECT_GE(gap, 0.0);
    EXPECT_LT(gap, last_gap);
    last_gap = gap;
  }
  EXPECT_LT(last_gap, 1e-11);
  ThresholdTable limit;
  limit.thresholds = {percentile_linear({0.9, 0.7}, 0.0), percentile_linear({0.8, 0.65}, 0.0)};
  for (Eigen::Index i = 0; i < post.rows(); ++i) {
    EXPECT_EQ(predict_open(post.row(i), limit).label, labels[static_cast<std::size_t>(i)]);
  }
}

TEST(PredictOpen, DecisionRule) {
  ThresholdTable t;
  t.thresholds = {0.6, 0.5};
  EXPECT_EQ(predict_open(rows({{0.55, 0.45}}).row(0), t).label, kUnknownLabel);
  t.thresholds = {0.5, 0.5};
  const OpenPrediction p = predict_open(rows({{0.55, 0.45}}).row(0), t);
  EXPECT_EQ(p.label, 1);
  EXPECT_EQ(p.confidence, 0.55);
  t.thresholds = {0.3, 0.3, 0.3, 0.3};
  EXPECT_EQ(predict_open(rows({{0.25, 0.25, 0.25, 0.25}}).row(0), t).label, kUnknownLabel);
  t.thresholds = {1.0, 1.0, 1.0, 1.0};
  EXPECT_EQ(predict_open(rows({{0.0, 0.0, 1.0, 0.0}}).row(0), t).label, 3);
}

TEST(PredictOpen, TiesGoToSmallestClass) {
  ThresholdTable t;
  t.thresholds = {0.0, 0.0, 0.0};
  EXPECT_EQ(predict_open(rows({{0.2, 0.4, 0.4}}).row(0), t).label, 2);
}

TEST(PredictOpen, RejectsUnnormalizedPosterior) {
  ThresholdTable t;
  t.thresholds = {0.5, 0.5};
  EXPECT_THROW(predict_open(rows({{0.5, 0.6}}).row(0), t), InvalidArgument);
  EXPECT_NO_THROW(predict_open(rows({{0.5, 0.5 + 5e-7}}).row(0), t));
}

// Raising a threshold never turns UNKNOWN into a class, and never changes
// the argmax.
TEST(PredictOpen, MonotoneInThresholds) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    RowVector post(4);
    for (Eigen::Index k = 0; k < 4; ++k) post(k) = u(rng);
    post /= post.sum();
    ThresholdTable lo, hi;
    for (int k = 0; k < 4; ++k) {
      const double a = u(rng), b = u(rng);
      lo.thresholds.push_back(std::min(a, b));
      hi.thresholds.push_back(std::max(a, b));
    }
    const OpenPrediction pl = predict_open(post, lo), ph = predict_open(post, hi);
    if (pl.label == kUnknownLabel) {
      EXPECT_EQ(ph.label, kUnknownLabel);
    }
    if (ph.label != kUnknownLabel) {
      EXPECT_EQ(ph.label, pl.label);
    }
  }
}

TEST(ThresholdCsv, Format) {
  ThresholdTable t;
  t.percentile = 5.0;
  t.thresholds = {0.5, 0.25};
  std::ostringstream out;
  write_threshold_csv(out, t);
  EXPECT_EQ(out.str(), "# percentile=5\nclass,threshold\n1,0.5\n2,0.25\n");
}

}  // namespace
}  // namespace dctau
