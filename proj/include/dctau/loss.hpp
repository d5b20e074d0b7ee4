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

// Supervised contrastive loss and the dual contrastive loss over known
// embeddings z and target-aware universum embeddings u, with analytic
// gradients and the per-anchor gradient decomposition.
//
// All losses share one kernel. For anchor i with positives P(i) (rows with
// the same label, i excluded) and cross members X(i) taken from the other
// embedding set, with s = a_i . b / tau:
//
//   l_i = -mean_{p in P(i)} s_ip + log( sum_{k != i} e^{s_ik} + sum_{j in X(i)} e^{s_ij} )
//
// The loss is the sum of l_i over anchors with a non-empty P(i).

#ifndef DCTAU_LOSS_HPP_
#define DCTAU_LOSS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "dctau/common.hpp"
#include "dctau/universum.hpp"

namespace dctau {

class DegenerateBatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr double kDefaultGamma = 1.0;

struct LossConfig {
  double temperature = kDefaultTemperature;
  double gamma = kDefaultGamma;
  // false drops the universum-anchored term (known-anchored term only).
  bool include_universum_term = true;
  // K; pseudo labels live in K+1..2K.
  int known_count = 0;
  PseudoLabelScheme scheme = PseudoLabelScheme::kPlusK;
};

struct LossResult {
  double value = 0.0;
  Matrix grad_z;  // dL/dz, one row per known embedding
  Matrix grad_u;  // dL/du, one row per universum embedding
  std::size_t skipped_anchors = 0;  // anchors without positives
};

// Gradient of one anchor's own term with respect to that anchor:
//   d l_i / d z_i = -(1/tau) (positive_mean + g_nk + g_tau)
// g_nk = -(1/S) sum_k C_k z_k and g_tau = -(1/S) sum_j O_j u_j carry the
// sign of the log-normalizer so that the reassembly above is exact.
struct AnchorTerms {
  std::size_t anchor = 0;
  RowVector positive_mean;
  RowVector g_nk;
  RowVector g_tau;
  // d l_i / d z_i accumulated by the stabilized kernel, independent of the
  // raw exponentials below.
  RowVector direct_grad;
  std::vector<std::size_t> known_members;  // every k != i
  std::vector<int> known_labels;
  std::vector<double> known_weights;       // C_k = exp(z_i . z_k / tau)
  std::vector<std::size_t> tau_members;    // U(i)
  std::vector<double> tau_weights;         // O_j = exp(z_i . u_j / tau)
  double normalizer = 0.0;                 // S = sum C_k + sum O_j
};

struct GradientDecomposition {
  double temperature = kDefaultTemperature;
  std::vector<AnchorTerms> anchors;

  RowVector reassemble(const AnchorTerms& t) const {
    return -(1.0 / temperature) * (t.positive_mean + t.g_nk + t.g_tau);
  }
};

namespace detail {

using Members = std::vector<std::vector<std::size_t>>;

struct KernelOutput {
  double value = 0.0;
  Matrix grad_anchors;
  Matrix grad_cross;
  std::size_t skipped = 0;
  std::vector<AnchorTerms> terms;
};

inline KernelOutput contrast_kernel(const Matrix& anchors, const Labels& labels,
                                    const Matrix& cross, const Members& members, double tau, bool want_terms) {
  const Eigen::Index n = anchors.rows();
  KernelOutput out;
  out.grad_anchors = Matrix::Zero(n, anchors.cols());
  out.grad_cross = Matrix::Zero(cross.rows(), anchors.cols());
  if (n == 0) return out;

  const Matrix sim = anchors * anchors.transpose() / tau;
  const Matrix sim_cross =
      cross.rows() > 0 ? Matrix(anchors * cross.transpose() / tau) : Matrix(n, 0);

  std::vector<std::size_t> positives;
  std::vector<double> w_known(static_cast<std::size_t>(n));
  std::vector<double> w_cross;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    positives.clear();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k != i && labels[static_cast<std::size_t>(k)] == labels[ui]) {
        positives.push_back(static_cast<std::size_t>(k));
      }
    }
    if (positives.empty()) {
      ++out.skipped;
      continue;
    }
    const auto& xi = members[ui];

    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k != i) peak = std::max(peak, sim(i, k));
    }
    for (std::size_t j : xi) peak = std::max(peak, sim_cross(i, static_cast<Eigen::Index>(j)));
    double total = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      w_known[static_cast<std::size_t>(k)] = k == i ? 0.0 : std::exp(sim(i, k) - peak);
      total += w_known[static_cast<std::size_t>(k)];
    }
    w_cross.assign(xi.size(), 0.0);
    for (std::size_t m = 0; m < xi.size(); ++m) {
      w_cross[m] = std::exp(sim_cross(i, static_cast<Eigen::Index>(xi[m])) - peak);
      total += w_cross[m];
    }
    const double log_norm = peak + std::log(total);

    double positive_sum = 0.0;
    for (std::size_t p : positives) positive_sum += sim(i, static_cast<Eigen::Index>(p));
    const double inv_p = 1.0 / static_cast<double>(positives.size());
    out.value += log_norm - inv_p * positive_sum;

    // Gradient of l_i.
    RowVector own = RowVector::Zero(anchors.cols());
    for (std::size_t p : positives) {
      const auto pi = static_cast<Eigen::Index>(p);
      own -= (inv_p / tau) * anchors.row(pi);
      out.grad_anchors.row(pi) -= (inv_p / tau) * anchors.row(i);
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      if (k == i) continue;
      const double w = w_known[static_cast<std::size_t>(k)] / total;
      own += (w / tau) * anchors.row(k);
      out.grad_anchors.row(k) += (w / tau) * anchors.row(i);
    }
    for (std::size_t m = 0; m < xi.size(); ++m) {
      const auto j = static_cast<Eigen::Index>(xi[m]);
      const double w = w_cross[m] / total;
      own += (w / tau) * cross.row(j);
      out.grad_cross.row(j) += (w / tau) * anchors.row(i);
    }
    out.grad_anchors.row(i) += own;

    if (want_terms) {
      AnchorTerms t;
      t.anchor = ui;
      t.direct_grad = own;
      t.positive_mean = RowVector::Zero(anchors.cols());
      for (std::size_t p : positives) t.positive_mean += anchors.row(static_cast<Eigen::Index>(p));
      t.positive_mean *= inv_p;
      // Raw exponentials, exactly as C_k and O_j are defined.
      double s = 0.0;
      RowVector nk = RowVector::Zero(anchors.cols());
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k == i) continue;
        const double c = std::exp(sim(i, k));
        t.known_members.push_back(static_cast<std::size_t>(k));
        t.known_labels.push_back(labels[static_cast<std::size_t>(k)]);
        t.known_weights.push_back(c);
        nk += c * anchors.row(k);
        s += c;
      }
      RowVector tu = RowVector::Zero(anchors.cols());
      for (std::size_t j : xi) {
        const double o = std::exp(sim_cross(i, static_cast<Eigen::Index>(j)));
        t.tau_members.push_back(j);
        t.tau_weights.push_back(o);
        tu += o * cross.row(static_cast<Eigen::Index>(j));
        s += o;
      }
      t.normalizer = s;
      t.g_nk = -nk / s;
      t.g_tau = -tu / s;
      out.terms.push_back(std::move(t));
    }
  }
  return out;
}

inline void check_common(const Matrix& z, const Labels& labels, const LossConfig& cfg) {
  require(cfg.temperature > 0.0 && std::isfinite(cfg.temperature), "loss: temperature must be > 0");
  require(static_cast<std::size_t>(z.rows()) == labels.size(), "loss: embedding/label count mismatch");
  require(z.rows() >= 2, "loss: need at least 2 rows");
  require(z.allFinite(), "loss: non-finite embedding");
}

// Pseudo label -> targeted known label; validates the +K correspondence.
inline int target_of(int pseudo, const LossConfig& cfg) {
  const int k = cfg.known_count;
  if (cfg.scheme == PseudoLabelScheme::kPlusOne) {
    require(pseudo == k + 1, "loss: k_plus_one pseudo labels must all equal K+1");
    return 0;  // targets every known class
  }
  require(pseudo > k && pseudo <= 2 * k, "loss: pseudo label outside K+1..2K");
  return pseudo - k;
}

inline void check_dual(const Matrix& z, const Labels& labels, const Matrix& u,
                       const Labels& u_labels, const LossConfig& cfg) {
  check_common(z, labels, cfg);
  require(cfg.known_count >= 1, "loss: known_count (K) must be set");
  require(static_cast<std::size_t>(u.rows()) == u_labels.size(), "loss: universum/label count mismatch");
  require(u.rows() == 0 || u.cols() == z.cols(), "loss: universum dimension mismatch");
  require(u.allFinite(), "loss: non-finite universum embedding");
  for (int y : labels) require(y >= 1 && y <= cfg.known_count, "loss: known label outside 1..K");
  for (int y : u_labels) target_of(y, cfg);
}

// X(i) for known anchors: universum rows whose target is anchor i's class.
inline Members known_cross_members(const Labels& labels, const Labels& u_labels,
                                   const LossConfig& cfg) {
  Members m(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < u_labels.size(); ++j) {
      const int t = target_of(u_labels[j], cfg);
      if (t == 0 || t == labels[i]) m[i].push_back(j);
    }
  }
  return m;
}

// X(j) for universum anchors: known rows of the targeted class.
inline Members universum_cross_members(const Labels& u_labels, const Labels& labels,
                                       const LossConfig& cfg) {
  Members m(u_labels.size());
  for (std::size_t j = 0; j < u_labels.size(); ++j) {
    const int t = target_of(u_labels[j], cfg);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (t == 0 || t == labels[i]) m[j].push_back(i);
    }
  }
  return m;
}

inline void require_some_anchor(const KernelOutput& k, Eigen::Index rows, const char* who) {
  if (k.skipped == static_cast<std::size_t>(rows)) {
    throw DegenerateBatch(std::string(who) + ": no anchor has a positive");
  }
}

}  // namespace detail

inline LossResult supcon_loss_grad(const Matrix& z, const Labels& labels, const LossConfig& cfg) {
  detail::check_common(z, labels, cfg);
  const detail::Members none(labels.size());
  auto k = detail::contrast_kernel(z, labels, Matrix(0, z.cols()), none, cfg.temperature, false);
  detail::require_some_anchor(k, z.rows(), "supcon_loss_grad");
  return {k.value, std::move(k.grad_anchors), Matrix(0, z.cols()), k.skipped};
}

struct KnownLossOutput {
  LossResult loss;
  GradientDecomposition decomposition;
};

// Known anchors; the denominator additionally holds the universum rows
// targeting the anchor's class.
inline KnownLossOutput dc_known_loss_grad(const Matrix& z, const Labels& labels, const Matrix& u,
                                          const Labels& u_labels, const LossConfig& cfg) {
  detail::check_dual(z, labels, u, u_labels, cfg);
  const Matrix cross = u.rows() > 0 ? u : Matrix(0, z.cols());
  auto k = detail::contrast_kernel(z, labels, cross,
                                   detail::known_cross_members(labels, u_labels, cfg),
                                   cfg.temperature, true);
  detail::require_some_anchor(k, z.rows(), "dc_known_loss_grad");
  KnownLossOutput out;
  out.loss = {k.value, std::move(k.grad_anchors), std::move(k.grad_cross), k.skipped};
  out.decomposition.temperature = cfg.temperature;
  out.decomposition.anchors = std::move(k.terms);
  return out;
}

// Universum anchors: positives share the pseudo label, negatives are the
// other universum rows plus the known rows of the targeted class.
inline LossResult dc_universum_loss_grad(const Matrix& u, const Labels& u_labels, const Matrix& z,
                                         const Labels& labels, const LossConfig& cfg) {
  detail::check_dual(z, labels, u, u_labels, cfg);
  require(u.rows() >= 2, "dc_universum_loss_grad: need at least 2 universum rows");
  auto k = detail::contrast_kernel(u, u_labels, z,
                                   detail::universum_cross_members(u_labels, labels, cfg),
                                   cfg.temperature, false);
  detail::require_some_anchor(k, u.rows(), "dc_universum_loss_grad");
  return {k.value, std::move(k.grad_cross), std::move(k.grad_anchors), k.skipped};
}

// L = L^k + gamma * L^u, or L^k alone when the universum term is disabled.
inline LossResult dc_total_loss_grad(const Matrix& z, const Labels& labels, const Matrix& u,
                                     const Labels& u_labels, const LossConfig& cfg) {
  require(cfg.gamma >= 0.0 && std::isfinite(cfg.gamma), "dc_total_loss_grad: gamma must be >= 0");
  LossResult total = dc_known_loss_grad(z, labels, u, u_labels, cfg).loss;
  if (!cfg.include_universum_term) return total;
  const LossResult lu = dc_universum_loss_grad(u, u_labels, z, labels, cfg);
  total.value += cfg.gamma * lu.value;
  total.grad_z += cfg.gamma * lu.grad_z;
  total.grad_u += cfg.gamma * lu.grad_u;
  total.skipped_anchors += lu.skipped_anchors;
  return total;
}

struct NegativeWeight {
  std::size_t index = 0;
  double weight = 0.0;
};

struct AnchorWeights {
  std::size_t anchor = 0;
  std::vector<NegativeWeight> known;  // C_k / S
  std::vector<NegativeWeight> tau;    // O_j / S
};

inline std::vector<AnchorWeights> hard_negative_weights(const GradientDecomposition& d) {
  std::vector<AnchorWeights> out;
  out.reserve(d.anchors.size());
  for (const auto& t : d.anchors) {
    AnchorWeights a;
    a.anchor = t.anchor;
    for (std::size_t m = 0; m < t.known_members.size(); ++m) {
      a.known.push_back({t.known_members[m], t.known_weights[m] / t.normalizer});
    }
    for (std::size_t m = 0; m < t.tau_members.size(); ++m) {
      a.tau.push_back({t.tau_members[m], t.tau_weights[m] / t.normalizer});
    }
    out.push_back(std::move(a));
  }
  return out;
}

// Debug table: anchor,kind,index,raw,weight
inline void write_weight_table(std::ostream& out, const GradientDecomposition& d) {
  out << "anchor,kind,index,raw,weight\n";
  for (const auto& t : d.anchors) {
    for (std::size_t m = 0; m < t.known_members.size(); ++m) {
      out << t.anchor << ",known," << t.known_members[m] << ',' << t.known_weights[m] << ','
          << t.known_weights[m] / t.normalizer << '\n';
    }
    for (std::size_t m = 0; m < t.tau_members.size(); ++m) {
      out << t.anchor << ",tau," << t.tau_members[m] << ',' << t.tau_weights[m] << ','
          << t.tau_weights[m] / t.normalizer << '\n';
    }
  }
}

}  // namespace dctau

#endif  // DCTAU_LOSS_HPP_
