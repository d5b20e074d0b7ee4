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

// Numeric self-checks: analytic gradients against finite differences,
// reduction and decomposition identities, hard-negative weight ratios and
// metrics against brute force. Used by `dctau verify` and the acceptance
// suite.

#ifndef DCTAU_VERIFY_HPP_
#define DCTAU_VERIFY_HPP_

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dctau/loss.hpp"
#include "dctau/metrics.hpp"
#include "dctau/model.hpp"
#include "dctau/oracle.hpp"

namespace dctau::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// A random dual batch of unit rows: n known rows over K classes (every
// class twice or more) and one universum row per known row labeled y + K.
struct DualBatch {
  Matrix z, u;
  Labels labels, u_labels;
  LossConfig cfg;
};

inline Matrix random_unit_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < rows; ++i) m.row(i).normalize();
  return m;
}

inline DualBatch random_dual_batch(std::uint64_t seed, int max_rows = 16, int max_dim = 16) {
  Rng rng(seed);
  std::uniform_int_distribution<int> k_dist(2, 4);
  DualBatch b;
  const int k = k_dist(rng);
  std::uniform_int_distribution<int> n_dist(2 * k, std::max(2 * k, max_rows));
  std::uniform_int_distribution<int> d_dist(2, max_dim);
  const int n = n_dist(rng);
  const int d = d_dist(rng);
  for (int i = 0; i < n; ++i) b.labels.push_back(i < 2 * k ? i / 2 + 1 : std::uniform_int_distribution<int>(1, k)(rng));
  std::shuffle(b.labels.begin(), b.labels.end(), rng);
  b.z = random_unit_rows(n, d, rng);
  b.u = random_unit_rows(n, d, rng);
  for (int y : b.labels) b.u_labels.push_back(y + k);
  b.cfg.known_count = k;
  b.cfg.temperature = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
  b.cfg.gamma = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
  return b;
}

using DualGradient = std::function<LossResult(const DualBatch&)>;
using DualValue = std::function<double(const Matrix& z, const Matrix& u, const DualBatch&)>;

struct GradientReport {
  double worst = 0.0;
  int batches = 0;
};

// Central differences of `value` against `analytic` for both z and u.
inline GradientReport compare_dual_gradient(const DualGradient& analytic, const DualValue& value, int seeds,
                                            std::uint64_t first_seed = 1) {
  GradientReport rep;
  for (int s = 0; s < seeds; ++s) {
    const DualBatch b = random_dual_batch(first_seed + static_cast<std::uint64_t>(s));
    const LossResult r = analytic(b);
    const Matrix num_z = oracle::central_difference([&](const Matrix& z) { return value(z, b.u, b); }, b.z);
    const Matrix num_u = oracle::central_difference([&](const Matrix& u) { return value(b.z, u, b); }, b.u);
    const Matrix ana_u = r.grad_u.rows() ? r.grad_u : Matrix::Zero(b.u.rows(), b.u.cols());
    rep.worst = std::max({rep.worst, oracle::relative_error(r.grad_z, num_z), oracle::relative_error(ana_u, num_u)});
    ++rep.batches;
  }
  return rep;
}

inline DualValue supcon_reference() {
  return [](const Matrix& z, const Matrix&, const DualBatch& b) {
    return oracle::supcon_value(z, b.labels, b.cfg.temperature);
  };
}
inline DualValue known_reference() {
  return [](const Matrix& z, const Matrix& u, const DualBatch& b) {
    return oracle::known_term_value(z, b.labels, u, b.u_labels, b.cfg.known_count, b.cfg.temperature);
  };
}
inline DualValue universum_reference() {
  return [](const Matrix& z, const Matrix& u, const DualBatch& b) {
    return oracle::universum_term_value(u, b.u_labels, z, b.labels, b.cfg.known_count, b.cfg.temperature);
  };
}
inline DualValue total_reference() {
  return [](const Matrix& z, const Matrix& u, const DualBatch& b) {
    return known_reference()(z, u, b) + b.cfg.gamma * universum_reference()(z, u, b);
  };
}

inline DualGradient supcon_analytic() {
  return [](const DualBatch& b) { return supcon_loss_grad(b.z, b.labels, b.cfg); };
}
inline DualGradient known_analytic() {
  return [](const DualBatch& b) { return dc_known_loss_grad(b.z, b.labels, b.u, b.u_labels, b.cfg).loss; };
}
inline DualGradient universum_analytic() {
  return [](const DualBatch& b) { return dc_universum_loss_grad(b.u, b.u_labels, b.z, b.labels, b.cfg); };
}
inline DualGradient total_analytic() {
  return [](const DualBatch& b) { return dc_total_loss_grad(b.z, b.labels, b.u, b.u_labels, b.cfg); };
}

inline CheckResult gradient_check(const std::string& name, const DualGradient& analytic, const DualValue& value,
                                  int seeds, double tolerance) {
  const GradientReport rep = compare_dual_gradient(analytic, value, seeds);
  std::ostringstream d;
  d << "worst relative error " << rep.worst << " over " << rep.batches << " batches (tol " << tolerance << ")";
  return {name, rep.worst < tolerance, d.str()};
}

// Loss through the whole embedding network on a toy model with a few
// hundred parameters: analytic parameter gradients vs finite differences.
inline double network_gradient_error(std::uint64_t seed) {
  Rng rng(seed);
  ModelParams params = init_params(5, {6}, 4, 3, seed);
  // Non-zero biases so every ReLU branch is exercised.
  for (auto& layer : params.encoder.layers) layer.bias = random_unit_rows(1, layer.bias.cols(), rng) * 0.1;
  for (auto& layer : params.projection.layers) layer.bias = random_unit_rows(1, layer.bias.cols(), rng) * 0.1;
  const Matrix inputs = random_unit_rows(12, 5, rng) * 2.0;
  const Labels labels = {1, 1, 2, 2, 3, 3};
  const Labels u_labels = {4, 4, 5, 5, 6, 6};
  LossConfig cfg;
  cfg.known_count = 3;
  cfg.temperature = 0.5;

  auto loss_of = [&](const ModelParams& p) {
    const Matrix e = embed(p, inputs);
    return dc_total_loss_grad(e.topRows(6), labels, e.bottomRows(6), u_labels, cfg).value;
  };
  const ForwardTrace trace = embed_traced(params, inputs);
  const LossResult r =
      dc_total_loss_grad(trace.embeddings.topRows(6), labels, trace.embeddings.bottomRows(6), u_labels, cfg);
  EmbeddingGradients g = backprop_embedding(params, trace, stack_rows(r.grad_z, r.grad_u));

  auto views = tensors(params);
  auto grad_views = tensors(g.params);
  std::vector<double> ana, num;
  for (std::size_t t = 0; t < views.size(); ++t) {
    if (views[t].part == Part::kClassifier) continue;
    for (Eigen::Index i = 0; i < views[t].size(); ++i) {
      double& w = views[t].data[i];
      const double saved = w;
      w = saved + oracle::kFiniteDifferenceStep;
      const double up = loss_of(params);
      w = saved - oracle::kFiniteDifferenceStep;
      const double down = loss_of(params);
      w = saved;
      num.push_back((up - down) / (2.0 * oracle::kFiniteDifferenceStep));
      ana.push_back(grad_views[t].data[i]);
    }
  }
  const Eigen::Map<const Eigen::VectorXd> a(ana.data(), static_cast<Eigen::Index>(ana.size()));
  const Eigen::Map<const Eigen::VectorXd> n(num.data(), static_cast<Eigen::Index>(num.size()));
  return oracle::relative_error(a, n);
}

inline CheckResult network_gradient_check(int seeds, double tolerance) {
  double worst = 0.0;
  for (int s = 1; s <= seeds; ++s) worst = std::max(worst, network_gradient_error(static_cast<std::uint64_t>(s)));
  std::ostringstream d;
  d << "worst relative error " << worst << " over " << seeds << " toy networks (tol " << tolerance << ")";
  return {"gradient/loss-through-network", worst < tolerance, d.str()};
}

inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

inline CheckResult reduction_check(int samples) {
  int failures = 0;
  for (int s = 1; s <= samples; ++s) {
    const DualBatch b = random_dual_batch(1000 + static_cast<std::uint64_t>(s), 32);
    const LossResult sup = supcon_loss_grad(b.z, b.labels, b.cfg);
    const LossResult known = dc_known_loss_grad(b.z, b.labels, Matrix(0, b.z.cols()), {}, b.cfg).loss;
    const bool same = std::memcmp(&sup.value, &known.value, sizeof(double)) == 0 && bitwise_equal(sup.grad_z, known.grad_z);
    failures += same ? 0 : 1;
  }
  return {"identity/reduction-to-supcon", failures == 0,
          std::to_string(samples - failures) + "/" + std::to_string(samples) + " bitwise equal"};
}

// Reassembly of each anchor's own gradient from (positive, G_NK, G_TAU),
// plus the fairly-contrast shrinkage of known-negative weights.
inline CheckResult decomposition_check(int samples, double tolerance) {
  double worst = 0.0;
  std::size_t anchors = 0, shrink_failures = 0;
  for (int s = 1; s <= samples; ++s) {
    const DualBatch b = random_dual_batch(2000 + static_cast<std::uint64_t>(s), 32);
    const auto with_tau = dc_known_loss_grad(b.z, b.labels, b.u, b.u_labels, b.cfg);
    const auto without = dc_known_loss_grad(b.z, b.labels, Matrix(0, b.z.cols()), {}, b.cfg);
    const auto& d = with_tau.decomposition;
    for (std::size_t a = 0; a < d.anchors.size(); ++a) {
      const auto& t = d.anchors[a];
      worst = std::max(worst, (d.reassemble(t) - t.direct_grad).cwiseAbs().maxCoeff());
      const auto& plain = without.decomposition.anchors[a];
      double plain_sum = 0.0;
      for (double c : plain.known_weights) plain_sum += c;
      for (std::size_t m = 0; m < t.known_weights.size(); ++m) {
        const bool shrinks = t.tau_members.empty() || t.known_weights[m] / t.normalizer < plain.known_weights[m] / plain_sum;
        shrink_failures += shrinks ? 0 : 1;
      }
      ++anchors;
    }
  }
  std::ostringstream det;
  det << "max |reassembled - direct| " << worst << " over " << anchors << " anchors (tol " << tolerance
      << "); fairly-contrast violations " << shrink_failures;
  return {"identity/gradient-decomposition", worst <= tolerance && shrink_failures == 0, det.str()};
}

// One anchor with a positive, `known_neg` known negatives at similarity
// s_known and `tau_neg` universum rows at similarity s_tau. Built in 3+
// dimensions so the dot products are exact.
struct SituationWeights {
  double known = 0.0;  // weight of one known negative
  double tau = 0.0;    // weight of one universum negative
  double sum = 0.0;    // all weights of the anchor
};

inline SituationWeights situation_weights(double s_known, double s_tau, double temperature) {
  // anchor e0; positive e0 as well; negatives mix e0 and e1 / e2.
  auto mix = [](double s, int axis) {
    RowVector v = RowVector::Zero(4);
    v(0) = s;
    v(axis) = std::sqrt(std::max(0.0, 1.0 - s * s));
    return v;
  };
  Matrix z(4, 4);
  z.row(0) = mix(1.0, 1);
  z.row(1) = mix(1.0, 1);
  z.row(2) = mix(s_known, 1);
  z.row(3) = mix(s_known, 2);
  Matrix u(2, 4);
  u.row(0) = mix(s_tau, 3);
  u.row(1) = mix(s_tau, 2);
  const Labels labels = {1, 1, 2, 2};
  const Labels u_labels = {3, 3};
  LossConfig cfg;
  cfg.known_count = 2;
  cfg.temperature = temperature;
  const auto out = dc_known_loss_grad(z, labels, u, u_labels, cfg);
  const auto weights = hard_negative_weights(out.decomposition);
  SituationWeights w;
  for (const auto& n : weights.front().known) {
    w.sum += n.weight;
    if (n.index == 2) w.known = n.weight;
  }
  for (const auto& n : weights.front().tau) w.sum += n.weight;
  w.tau = weights.front().tau.front().weight;
  return w;
}

inline CheckResult hard_negative_check(double tolerance) {
  const double tau = 0.5;
  const double expected = std::exp(1.0 / tau);
  const SituationWeights s1 = situation_weights(1.0, 0.0, tau);
  const SituationWeights s2 = situation_weights(0.0, 1.0, tau);
  const SituationWeights s3 = situation_weights(0.7, 0.7, tau);
  const double r1 = s1.known / s1.tau;
  const double r2 = s2.tau / s2.known;
  const bool ok = std::abs(r1 - expected) <= tolerance * expected && std::abs(r2 - expected) <= tolerance * expected &&
                  s3.known == s3.tau && std::abs(s1.sum - 1.0) <= 1e-12 && std::abs(s2.sum - 1.0) <= 1e-12;
  std::ostringstream d;
  d.precision(12);
  d << "situation1 known/tau " << r1 << ", situation2 tau/known " << r2 << " (expected e^(1/tau) " << expected
    << "), situation3 known " << s3.known << " tau " << s3.tau;
  return {"hard-negative/situations", ok, d.str()};
}

// Random posteriors with ties injected, compared with brute force.
inline CheckResult metric_oracle_check(int samples, double tolerance) {
  double worst = 0.0;
  bool trivia = auroc({0.9, 0.8}, {0.1, 0.2}) == 1.0 && auroc({0.5, 0.5}, {0.5, 0.5, 0.5}) == 0.5;
  for (int s = 1; s <= samples; ++s) {
    Rng rng(3000 + static_cast<std::uint64_t>(s));
    const int k = std::uniform_int_distribution<int>(2, 5)(rng);
    const int n_known = std::uniform_int_distribution<int>(1, 120)(rng);
    const int n_unknown = std::uniform_int_distribution<int>(1, 80)(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto random_posteriors = [&](int n) {
      Matrix p(n, k);
      for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = std::round(unit(rng) * 8.0) + 0.5;  // coarse: ties
      for (Eigen::Index i = 0; i < n; ++i) p.row(i) /= p.row(i).sum();
      return p;
    };
    const Matrix kp = random_posteriors(n_known);
    const Matrix up = random_posteriors(n_unknown);
    Labels truth;
    std::vector<double> kc, uc;
    std::vector<bool> correct;
    for (int i = 0; i < n_known; ++i) {
      truth.push_back(std::uniform_int_distribution<int>(1, k)(rng));
      kc.push_back(kp.row(i).maxCoeff());
      correct.push_back(argmax_label(kp.row(i)) == truth.back());
    }
    for (int i = 0; i < n_unknown; ++i) uc.push_back(up.row(i).maxCoeff());
    worst = std::max(worst, std::abs(auroc(kc, uc) - oracle::auroc_pairs(kc, uc)));
    worst = std::max(worst, std::abs(oscr(kp, truth, up) - oracle::oscr_enumerate(kc, correct, uc)));

    Labels pred, all_truth;
    for (int i = 0; i < n_known + n_unknown; ++i) {
      pred.push_back(std::uniform_int_distribution<int>(0, k)(rng));
      all_truth.push_back(std::uniform_int_distribution<int>(0, k)(rng));
    }
    worst = std::max(worst, std::abs(macro_f1(pred, all_truth, k) - oracle::macro_f1_confusion(pred, all_truth, k)));
  }
  std::ostringstream d;
  d << "max |metric - brute force| " << worst << " over " << samples << " cases (tol " << tolerance
    << "); AUROC trivia " << (trivia ? "exact" : "WRONG");
  return {"metrics/brute-force", worst <= tolerance && trivia, d.str()};
}

struct SuiteOptions {
  int gradient_seeds = 20;
  double gradient_tolerance = 1e-4;
  int identity_samples = 100;
  double decomposition_tolerance = 1e-10;
  double situation_tolerance = 1e-9;
  int metric_samples = 200;
  double metric_tolerance = 1e-9;
};

inline std::vector<CheckResult> run_gradient_checks(const SuiteOptions& o) {
  return {
      gradient_check("gradient/supcon", supcon_analytic(), supcon_reference(), o.gradient_seeds, o.gradient_tolerance),
      gradient_check("gradient/known-term", known_analytic(), known_reference(), o.gradient_seeds, o.gradient_tolerance),
      gradient_check("gradient/universum-term", universum_analytic(), universum_reference(), o.gradient_seeds,
                     o.gradient_tolerance),
      gradient_check("gradient/total", total_analytic(), total_reference(), o.gradient_seeds, o.gradient_tolerance),
      network_gradient_check(o.gradient_seeds, o.gradient_tolerance),
  };
}

inline std::vector<CheckResult> run_all(const SuiteOptions& o = {}) {
  std::vector<CheckResult> out = run_gradient_checks(o);
  out.push_back(reduction_check(o.identity_samples));
  out.push_back(decomposition_check(o.identity_samples, o.decomposition_tolerance));
  out.push_back(hard_negative_check(o.situation_tolerance));
  out.push_back(metric_oracle_check(o.metric_samples, o.metric_tolerance));
  return out;
}

}  // namespace dctau::verify

#endif  // DCTAU_VERIFY_HPP_
