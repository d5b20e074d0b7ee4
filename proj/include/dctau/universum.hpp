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

// Target-aware universum construction (targeted mixup) and the plain
// two-sample mixup baseline.

#ifndef DCTAU_UNIVERSUM_HPP_
#define DCTAU_UNIVERSUM_HPP_

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dctau/common.hpp"
#include "dctau/data.hpp"

namespace dctau {

class InsufficientClasses : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// How pseudo-unknown rows are labeled. kPlusK gives every TAU row the class
// K + (label of its target); kPlusOne collapses them all into class K + 1.
enum class PseudoLabelScheme { kPlusK, kPlusOne };

inline std::string to_string(PseudoLabelScheme s) {
  return s == PseudoLabelScheme::kPlusK ? "k_plus_k" : "k_plus_one";
}

struct UniversumBatch {
  Matrix features;       // one row per anchor of the source batch
  Labels labels;         // pseudo labels, in K+1..2K
  Labels source_labels;  // label of the targeted anchor
  double lambda = 0.5;
  int known_count = 0;   // K
  PseudoLabelScheme scheme = PseudoLabelScheme::kPlusK;

  std::size_t size() const { return labels.size(); }
};

struct MixupPair {
  Matrix features;
  std::vector<double> lambdas;               // per row
  std::vector<std::size_t> first, second;    // source rows of each pair
  int label = 0;                             // single pseudo-class marker
};

inline constexpr double kDefaultLambda = 0.5;

// For anchor x_i draws one row uniformly from every other class present in
// the batch, averages those K_B - 1 rows and returns
//   lambda * x_i + (1 - lambda) * average
// labeled K + y_i. Draws are fresh per anchor.
inline UniversumBatch make_universum(const Batch& batch, int known_count, double lambda, Rng& rng) {
  require(std::isfinite(lambda) && lambda >= 0.0 && lambda <= 1.0,
          "make_universum: lambda must be in [0,1]");
  require(known_count >= 1, "make_universum: K must be >= 1");
  const auto& present = batch.present_classes;
  if (present.size() < 2) {
    throw InsufficientClasses("make_universum: batch holds fewer than 2 classes");
  }

  std::vector<std::vector<std::size_t>> rows_of(present.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    for (std::size_t c = 0; c < present.size(); ++c) {
      if (batch.labels[r] == present[c]) rows_of[c].push_back(r);
    }
  }

  UniversumBatch ub;
  ub.lambda = lambda;
  ub.known_count = known_count;
  ub.features.resize(batch.features.rows(), batch.features.cols());
  ub.labels.reserve(batch.size());
  ub.source_labels = batch.labels;

  const double others = static_cast<double>(present.size() - 1);
  RowVector average(batch.features.cols());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const int y = batch.labels[r];
    require(y >= 1 && y <= known_count, "make_universum: anchor label outside 1..K");
    average.setZero();
    for (std::size_t c = 0; c < present.size(); ++c) {
      if (present[c] == y) continue;
      std::uniform_int_distribution<std::size_t> pick(0, rows_of[c].size() - 1);
      average += batch.features.row(static_cast<Eigen::Index>(rows_of[c][pick(rng)]));
    }
    average /= others;
    const auto i = static_cast<Eigen::Index>(r);
    ub.features.row(i) = lambda * batch.features.row(i) + (1.0 - lambda) * average;
    ub.labels.push_back(known_count + y);
  }
  return ub;
}

// Plain mixup across classes: each batch row is paired with a row of a
// different class, lambda ~ Beta(alpha, alpha) per pair. `forced_lambda`
// pins lambda for every pair.
inline MixupPair make_mixup_baseline(const Batch& batch, double alpha, Rng& rng,
                                     std::optional<double> forced_lambda = std::nullopt) {
  require(std::isfinite(alpha) && alpha > 0.0, "make_mixup_baseline: alpha must be > 0");
  if (batch.present_classes.size() < 2) {
    throw InsufficientClasses("make_mixup_baseline: batch holds fewer than 2 classes");
  }
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, batch.size() - 1);

  MixupPair out;
  out.features.resize(batch.features.rows(), batch.features.cols());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    std::size_t j = pick(rng);
    while (batch.labels[j] == batch.labels[r]) j = pick(rng);
    double lambda = 0.0;
    if (forced_lambda) {
      lambda = *forced_lambda;
    } else {
      const double a = gamma(rng);
      const double b = gamma(rng);
      lambda = a / (a + b);
    }
    const auto i = static_cast<Eigen::Index>(r);
    out.features.row(i) = lambda * batch.features.row(i) +
                          (1.0 - lambda) * batch.features.row(static_cast<Eigen::Index>(j));
    out.lambdas.push_back(lambda);
    out.first.push_back(r);
    out.second.push_back(j);
  }
  out.label = static_cast<int>(batch.present_classes.back()) + 1;
  return out;
}

// Relabels pseudo-unknowns; idempotent.
inline UniversumBatch assign_pseudo_labels(UniversumBatch ub, PseudoLabelScheme scheme) {
  ub.scheme = scheme;
  for (std::size_t r = 0; r < ub.size(); ++r) {
    ub.labels[r] = scheme == PseudoLabelScheme::kPlusK ? ub.known_count + ub.source_labels[r]
                                                       : ub.known_count + 1;
  }
  return ub;
}

}  // namespace dctau

#endif  // DCTAU_UNIVERSUM_HPP_
