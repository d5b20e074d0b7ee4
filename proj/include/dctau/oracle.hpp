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

// Independent reference implementations used to check the library:
// central finite differences, direct (unstabilized, loop-per-term) loss
// evaluation, and brute-force metrics. Nothing here calls the code paths it
// is meant to check.

#ifndef DCTAU_ORACLE_HPP_
#define DCTAU_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "dctau/common.hpp"

namespace dctau::oracle {

inline constexpr double kFiniteDifferenceStep = 1e-5;

// Central differences of a scalar function with respect to every entry of x.
template <class F>
Matrix central_difference(F&& f, Matrix x, double h = kFiniteDifferenceStep) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f(x);
    x.data()[i] = saved - h;
    const double down = f(x);
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// |a - b| / max(|a|, |b|) in the Frobenius norm; 0 when both vanish.
inline double relative_error(const Matrix& a, const Matrix& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale == 0.0) return 0.0;
  return (a - b).norm() / scale;
}

// Direct evaluation of the contrastive sum. `cross_of(i)` lists the rows of
// `cross` added to anchor i's denominator.
inline double contrastive_value(const Matrix& anchors, const Labels& labels, const Matrix& cross,
                                const std::function<std::vector<std::size_t>(std::size_t)>& cross_of,
                                double tau) {
  double total = 0.0;
  const auto n = static_cast<std::size_t>(anchors.rows());
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      double dot = 0.0;
      for (Eigen::Index c = 0; c < anchors.cols(); ++c) {
        dot += anchors(static_cast<Eigen::Index>(i), c) * anchors(static_cast<Eigen::Index>(k), c);
      }
      denom += std::exp(dot / tau);
    }
    for (std::size_t j : cross_of(i)) {
      double dot = 0.0;
      for (Eigen::Index c = 0; c < anchors.cols(); ++c) {
        dot += anchors(static_cast<Eigen::Index>(i), c) * cross(static_cast<Eigen::Index>(j), c);
      }
      denom += std::exp(dot / tau);
    }
    double term = 0.0;
    int positives = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == i || labels[p] != labels[i]) continue;
      double dot = 0.0;
      for (Eigen::Index c = 0; c < anchors.cols(); ++c) {
        dot += anchors(static_cast<Eigen::Index>(i), c) * anchors(static_cast<Eigen::Index>(p), c);
      }
      term += std::log(std::exp(dot / tau) / denom);
      ++positives;
    }
    if (positives > 0) total += -term / positives;
  }
  return total;
}

inline double supcon_value(const Matrix& z, const Labels& labels, double tau) {
  return contrastive_value(z, labels, Matrix(0, z.cols()), [](std::size_t) { return std::vector<std::size_t>{}; },
                           tau);
}

// Known anchors; universum row j joins anchor i's denominator when its
// pseudo label is labels[i] + K.
inline double known_term_value(const Matrix& z, const Labels& labels, const Matrix& u, const Labels& u_labels,
                               int known_count, double tau) {
  return contrastive_value(
      z, labels, u,
      [&](std::size_t i) {
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < u_labels.size(); ++j) {
          if (u_labels[j] == labels[i] + known_count) out.push_back(j);
        }
        return out;
      },
      tau);
}

// Universum anchors; known row i joins anchor j's denominator when
// labels[i] + K equals the anchor's pseudo label.
inline double universum_term_value(const Matrix& u, const Labels& u_labels, const Matrix& z,
                                   const Labels& labels, int known_count, double tau) {
  return contrastive_value(
      u, u_labels, z,
      [&](std::size_t j) {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (labels[i] + known_count == u_labels[j]) out.push_back(i);
        }
        return out;
      },
      tau);
}

// Pair counting.
inline double auroc_pairs(const std::vector<double>& known, const std::vector<double>& unknown) {
  double wins = 0.0;
  for (double a : known) {
    for (double b : unknown) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return wins / (static_cast<double>(known.size()) * static_cast<double>(unknown.size()));
}

// Re-counts CCR/FPR from scratch at every candidate threshold (each observed
// confidence), orders points by FPR then CCR, pads the FPR endpoints with
// the nearest CCR and integrates by trapezoids.
inline double oscr_enumerate(const std::vector<double>& known_conf, const std::vector<bool>& known_correct,
                             const std::vector<double>& unknown_conf) {
  std::vector<double> candidates = known_conf;
  candidates.insert(candidates.end(), unknown_conf.begin(), unknown_conf.end());
  std::vector<std::pair<double, double>> pts;  // (fpr, ccr)
  for (double delta : candidates) {
    double ccr = 0.0, fpr = 0.0;
    for (std::size_t i = 0; i < known_conf.size(); ++i) ccr += (known_correct[i] && known_conf[i] >= delta) ? 1 : 0;
    for (double c : unknown_conf) fpr += c >= delta ? 1 : 0;
    pts.emplace_back(fpr / static_cast<double>(unknown_conf.size()), ccr / static_cast<double>(known_conf.size()));
  }
  std::sort(pts.begin(), pts.end());
  if (pts.front().first > 0.0) pts.insert(pts.begin(), {0.0, pts.front().second});
  if (pts.back().first < 1.0) pts.emplace_back(1.0, pts.back().second);
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
  }
  return area;
}

// Confusion-matrix route.
inline double macro_f1_confusion(const Labels& predicted, const Labels& truth, int known_count) {
  std::map<std::pair<int, int>, double> confusion;
  for (std::size_t i = 0; i < truth.size(); ++i) confusion[{truth[i], predicted[i]}] += 1.0;
  double sum = 0.0;
  for (int c = 0; c <= known_count; ++c) {
    double tp = 0.0, row = 0.0, col = 0.0;
    for (const auto& [key, count] : confusion) {
      if (key.first == c && key.second == c) tp += count;
      if (key.first == c) row += count;
      if (key.second == c) col += count;
    }
    const double precision = col > 0 ? tp / col : 0.0;
    const double recall = row > 0 ? tp / row : 0.0;
    sum += (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  return sum / static_cast<double>(known_count + 1);
}

}  // namespace dctau::oracle

#endif  // DCTAU_ORACLE_HPP_
