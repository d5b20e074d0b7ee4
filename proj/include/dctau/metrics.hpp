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

#ifndef DCTAU_METRICS_HPP_
#define DCTAU_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <vector>

#include "dctau/common.hpp"
#include "dctau/openset.hpp"

namespace dctau {

// Probability that a known score exceeds an unknown score, ties counted 1/2.
// Computed from mid-ranks of the pooled sample (Mann-Whitney U).
inline double auroc(const std::vector<double>& known, const std::vector<double>& unknown) {
  require(!known.empty() && !unknown.empty(), "auroc: score lists must be non-empty");
  struct Entry {
    double score;
    bool is_known;
  };
  std::vector<Entry> all;
  all.reserve(known.size() + unknown.size());
  for (double s : known) all.push_back({s, true});
  for (double s : unknown) all.push_back({s, false});
  for (const auto& e : all) require(std::isfinite(e.score), "auroc: non-finite score");
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  double known_rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t known_in_group = 0;
    while (j < all.size() && all[j].score == all[i].score) known_in_group += all[j++].is_known ? 1 : 0;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    known_rank_sum += mid_rank * static_cast<double>(known_in_group);
    i = j;
  }
  const auto n_k = static_cast<double>(known.size());
  const auto n_u = static_cast<double>(unknown.size());
  const double u_stat = known_rank_sum - n_k * (n_k + 1.0) / 2.0;
  return u_stat / (n_k * n_u);
}

struct CurvePoint {
  double delta = 0.0;
  double ccr = 0.0;
  double fpr = 0.0;
};

struct OscrResult {
  double area = 0.0;
  std::vector<CurvePoint> curve;  // ordered by decreasing delta (increasing FPR)
};

// Sweeps delta over the distinct confidence values. CCR counts known rows
// whose argmax equals the truth and whose confidence is >= delta; FPR counts
// unknown rows with confidence >= delta. The curve is extended to FPR 0 and 1
// with the extreme CCR values held constant and integrated by trapezoids.
inline OscrResult oscr_curve(const Matrix& known_posteriors, const Labels& known_truth,
                             const Matrix& unknown_posteriors) {
  require(known_posteriors.rows() > 0 && unknown_posteriors.rows() > 0, "oscr: empty sample set");
  require(static_cast<std::size_t>(known_posteriors.rows()) == known_truth.size(),
          "oscr: label count mismatch");

  struct Entry {
    double conf;
    bool known;
    bool correct;
  };
  std::vector<Entry> all;
  for (Eigen::Index i = 0; i < known_posteriors.rows(); ++i) {
    const int pred = argmax_label(known_posteriors.row(i));
    all.push_back({known_posteriors.row(i).maxCoeff(), true, pred == known_truth[static_cast<std::size_t>(i)]});
  }
  for (Eigen::Index i = 0; i < unknown_posteriors.rows(); ++i) {
    all.push_back({unknown_posteriors.row(i).maxCoeff(), false, false});
  }
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.conf > b.conf; });

  const auto n_known = static_cast<double>(known_posteriors.rows());
  const auto n_unknown = static_cast<double>(unknown_posteriors.rows());
  OscrResult r;
  std::size_t correct = 0, false_pos = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double delta = all[i].conf;
    for (; i < all.size() && all[i].conf == delta; ++i) {
      if (all[i].known && all[i].correct) ++correct;
      if (!all[i].known) ++false_pos;
    }
    r.curve.push_back({delta, static_cast<double>(correct) / n_known,
                       static_cast<double>(false_pos) / n_unknown});
  }

  std::vector<CurvePoint> path;
  if (r.curve.front().fpr > 0.0) path.push_back({r.curve.front().delta, r.curve.front().ccr, 0.0});
  path.insert(path.end(), r.curve.begin(), r.curve.end());
  if (r.curve.back().fpr < 1.0) path.push_back({r.curve.back().delta, r.curve.back().ccr, 1.0});
  for (std::size_t i = 1; i < path.size(); ++i) {
    r.area += 0.5 * (path[i].fpr - path[i - 1].fpr) * (path[i].ccr + path[i - 1].ccr);
  }
  return r;
}

inline double oscr(const Matrix& known_posteriors, const Labels& known_truth,
                   const Matrix& unknown_posteriors) {
  return oscr_curve(known_posteriors, known_truth, unknown_posteriors).area;
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "delta,ccr,fpr\n";
  out.precision(17);
  for (const auto& p : curve) out << p.delta << ',' << p.ccr << ',' << p.fpr << '\n';
}

// Unweighted mean of per-class F1 over classes 1..K plus kUnknownLabel.
// A class absent from both truth and prediction scores 0 and still counts.
inline double macro_f1(const Labels& predicted, const Labels& truth, int known_count) {
  require(predicted.size() == truth.size(), "macro_f1: length mismatch");
  require(known_count >= 1, "macro_f1: K must be >= 1");
  const auto classes = static_cast<std::size_t>(known_count) + 1;
  std::vector<double> tp(classes, 0.0), fp(classes, 0.0), fn(classes, 0.0);
  auto slot = [&](int label) {
    require(label >= 0 && label <= known_count, "macro_f1: label outside 0..K");
    return static_cast<std::size_t>(label);
  };
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = slot(truth[i]);
    const auto p = slot(predicted[i]);
    if (t == p) {
      tp[t] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[t] += 1.0;
    }
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    sum += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
  }
  return sum / static_cast<double>(classes);
}

inline double closed_accuracy(const Labels& predicted, const Labels& truth) {
  require(predicted.size() == truth.size(), "closed_accuracy: length mismatch");
  require(!truth.empty(), "closed_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] != kUnknownLabel, "closed_accuracy: unknown label in truth");
    hits += predicted[i] == truth[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace dctau

#endif  // DCTAU_METRICS_HPP_
