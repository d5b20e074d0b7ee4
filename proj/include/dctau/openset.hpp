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

// Percentile rejection thresholds and the open-set decision rule.

#ifndef DCTAU_OPENSET_HPP_
#define DCTAU_OPENSET_HPP_

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

#include "dctau/common.hpp"

namespace dctau {

inline constexpr double kDefaultPercentile = 5.0;

enum class ThresholdMode { kPerClass, kGlobal };
enum class ThresholdRows { kCorrectOnly, kAll };

struct ThresholdTable {
  std::vector<double> thresholds;  // index k-1 holds the threshold of class k
  double percentile = kDefaultPercentile;

  double of(int label) const { return thresholds.at(static_cast<std::size_t>(label - 1)); }
  int size() const { return static_cast<int>(thresholds.size()); }
};

struct OpenPrediction {
  int label = kUnknownLabel;  // 1..K or kUnknownLabel
  double confidence = 0.0;    // max posterior
};

// Linear interpolation between closest ranks with inclusive endpoints:
// position = p/100 * (n-1) in the sorted sample.
inline double percentile_linear(std::vector<double> values, double percentile) {
  require(!values.empty(), "percentile: empty sample");
  require(percentile >= 0.0 && percentile <= 100.0, "percentile: must be in [0,100]");
  std::sort(values.begin(), values.end());
  const double pos = percentile / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

// Smallest index wins ties. Returns 1-based class.
inline int argmax_label(const Eigen::Ref<const RowVector>& posterior) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < posterior.size(); ++k) {
    if (posterior(k) > posterior(best)) best = k;
  }
  return static_cast<int>(best) + 1;
}

// Per class k: the percentile of max-posterior confidences of training rows
// of class k (correctly classified ones by default). Classes with no eligible
// rows, and every class in global mode, use the percentile over all eligible
// rows.
inline ThresholdTable fit_thresholds(const Matrix& train_posteriors, const Labels& train_labels,
                                     double percentile, ThresholdMode mode = ThresholdMode::kPerClass,
                                     ThresholdRows rows = ThresholdRows::kCorrectOnly) {
  require(percentile > 0.0 && percentile < 100.0, "fit_thresholds: percentile must be in (0,100)");
  require(train_posteriors.cols() >= 1, "fit_thresholds: empty class set");
  require(static_cast<std::size_t>(train_posteriors.rows()) == train_labels.size(),
          "fit_thresholds: label count mismatch");
  require(!train_labels.empty(), "fit_thresholds: no training rows");
  const auto k_count = static_cast<std::size_t>(train_posteriors.cols());

  std::vector<std::vector<double>> per_class(k_count);
  std::vector<double> pooled;
  for (Eigen::Index i = 0; i < train_posteriors.rows(); ++i) {
    const int y = train_labels[static_cast<std::size_t>(i)];
    require(y >= 1 && static_cast<std::size_t>(y) <= k_count, "fit_thresholds: label outside 1..K");
    const double row_sum = train_posteriors.row(i).sum();
    require(std::abs(row_sum - 1.0) <= 1e-6, "fit_thresholds: posterior row does not sum to 1");
    const int predicted = argmax_label(train_posteriors.row(i));
    if (rows == ThresholdRows::kCorrectOnly && predicted != y) continue;
    const double conf = train_posteriors.row(i).maxCoeff();
    per_class[static_cast<std::size_t>(y - 1)].push_back(conf);
    pooled.push_back(conf);
  }
  if (pooled.empty()) {
    // Nothing classified correctly: fall back to every row's confidence.
    for (Eigen::Index i = 0; i < train_posteriors.rows(); ++i) {
      pooled.push_back(train_posteriors.row(i).maxCoeff());
    }
  }
  const double global = percentile_linear(pooled, percentile);

  ThresholdTable table;
  table.percentile = percentile;
  table.thresholds.reserve(k_count);
  for (const auto& confs : per_class) {
    const bool own = mode == ThresholdMode::kPerClass && !confs.empty();
    table.thresholds.push_back(std::clamp(own ? percentile_linear(confs, percentile) : global, 0.0, 1.0));
  }
  return table;
}

inline OpenPrediction predict_open(const Eigen::Ref<const RowVector>& posterior,
                                   const ThresholdTable& table) {
  require(posterior.size() == table.size(), "predict_open: posterior length differs from K");
  require(std::abs(posterior.sum() - 1.0) <= 1e-6, "predict_open: posterior is not normalized");
  const int k = argmax_label(posterior);
  const double conf = posterior(k - 1);
  return {conf >= table.of(k) ? k : kUnknownLabel, conf};
}

inline void write_threshold_csv(std::ostream& out, const ThresholdTable& table) {
  out << "# percentile=" << table.percentile << '\n' << "class,threshold\n";
  out.precision(17);
  for (int k = 1; k <= table.size(); ++k) out << k << ',' << table.of(k) << '\n';
}

}  // namespace dctau

#endif  // DCTAU_OPENSET_HPP_
