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

// Dense encoder E, projection head psi and classifier f with explicit
// forward and backward passes, plus Adam / SGD-momentum updates.
//
//   embed:    x -> E(x) -> psi(E(x)) = p -> z = p / |p|
//   classify: x -> E(x) -> f(E(x)) = logits

#ifndef DCTAU_MODEL_HPP_
#define DCTAU_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dctau/common.hpp"

namespace dctau {

struct DenseLayer {
  Matrix weight;  // fan_in x fan_out
  RowVector bias;

  Eigen::Index fan_in() const { return weight.rows(); }
  Eigen::Index fan_out() const { return weight.cols(); }
};

// A stack of dense layers. ReLU follows every layer when relu_last is set,
// otherwise every layer but the last.
struct Mlp {
  std::vector<DenseLayer> layers;
  bool relu_last = false;

  bool has_relu(std::size_t l) const { return relu_last || l + 1 < layers.size(); }
  bool empty() const { return layers.empty(); }
};

struct ModelParams {
  Mlp encoder{{}, true};
  Mlp projection;
  Mlp classifier;
  Eigen::Index input_dim = 0;

  Eigen::Index encoder_dim() const {
    return encoder.empty() ? input_dim : encoder.layers.back().fan_out();
  }
  Eigen::Index projection_dim() const { return projection.layers.back().fan_out(); }
  Eigen::Index class_count() const { return classifier.layers.back().fan_out(); }
};

enum class Part { kEncoder, kProjection, kClassifier };

struct TensorView {
  std::string name;
  Part part;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const { return rows * cols; }
};

namespace detail {
inline void append_views(Mlp& mlp, const char* prefix, Part part, std::vector<TensorView>& out) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    auto& layer = mlp.layers[l];
    const std::string base = std::string(prefix) + "." + std::to_string(l);
    out.push_back({base + ".weight", part, layer.weight.data(), layer.weight.rows(), layer.weight.cols()});
    out.push_back({base + ".bias", part, layer.bias.data(), 1, layer.bias.cols()});
  }
}
}  // namespace detail

// Flat views of every parameter tensor in a fixed order.
inline std::vector<TensorView> tensors(ModelParams& p) {
  std::vector<TensorView> out;
  detail::append_views(p.encoder, "encoder", Part::kEncoder, out);
  detail::append_views(p.projection, "projection", Part::kProjection, out);
  detail::append_views(p.classifier, "classifier", Part::kClassifier, out);
  return out;
}

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto& t : tensors(z)) std::fill(t.data, t.data + t.size(), 0.0);
  return z;
}

inline bool all_finite(ModelParams& p) {
  for (const auto& t : tensors(p)) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t.data[i])) return false;
    }
  }
  return true;
}

namespace detail {
// He-uniform: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)), zero bias.
inline DenseLayer he_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  DenseLayer layer{Matrix(fan_in, fan_out), RowVector::Zero(fan_out)};
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
  return layer;
}
}  // namespace detail

// Encoder d -> hidden..., projection D_E -> D_E -> proj_dim, classifier
// D_E -> [classifier_hidden] -> K. An empty hidden list makes E the identity.
inline ModelParams init_params(int dim, const std::vector<int>& hidden, int proj_dim, int class_count,
                               std::uint64_t seed, int classifier_hidden = 0) {
  require(dim >= 1 && proj_dim >= 1 && class_count >= 1, "init_params: dimensions must be >= 1");
  require(classifier_hidden >= 0, "init_params: classifier_hidden must be >= 0");
  for (int h : hidden) require(h >= 1, "init_params: hidden widths must be >= 1");
  Rng rng(seed);
  ModelParams p;
  p.input_dim = dim;
  Eigen::Index width = dim;
  for (int h : hidden) {
    p.encoder.layers.push_back(detail::he_uniform(width, h, rng));
    width = h;
  }
  p.projection.layers.push_back(detail::he_uniform(width, width, rng));
  p.projection.layers.push_back(detail::he_uniform(width, proj_dim, rng));
  if (classifier_hidden > 0) {
    p.classifier.layers.push_back(detail::he_uniform(width, classifier_hidden, rng));
    p.classifier.layers.push_back(detail::he_uniform(classifier_hidden, class_count, rng));
  } else {
    p.classifier.layers.push_back(detail::he_uniform(width, class_count, rng));
  }
  return p;
}

struct MlpTrace {
  std::vector<Matrix> inputs;          // input of each layer
  std::vector<Matrix> pre_activations;
  Matrix output;
};

inline MlpTrace forward(const Mlp& mlp, const Matrix& x) {
  MlpTrace t;
  Matrix h = x;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    Matrix pre = h * layer.weight;
    pre.rowwise() += layer.bias;
    t.inputs.push_back(std::move(h));
    h = mlp.has_relu(l) ? Matrix(pre.cwiseMax(0.0)) : pre;
    t.pre_activations.push_back(std::move(pre));
  }
  t.output = std::move(h);
  return t;
}

// Accumulates parameter gradients into `grads`; returns dL/dinput.
inline Matrix backward(const Mlp& mlp, const MlpTrace& t, Matrix d_out, Mlp* grads) {
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    if (mlp.has_relu(l)) {
      d_out = d_out.cwiseProduct((t.pre_activations[l].array() > 0.0).cast<double>().matrix());
    }
    if (grads) {
      grads->layers[l].weight.noalias() += t.inputs[l].transpose() * d_out;
      grads->layers[l].bias += d_out.colwise().sum();
    }
    d_out = d_out * mlp.layers[l].weight.transpose();
  }
  return d_out;
}

struct ForwardTrace {
  MlpTrace encoder;
  MlpTrace projection;
  Eigen::VectorXd norms;  // |p| per row
  Matrix embeddings;      // z
};

inline void check_inputs(const ModelParams& params, const Matrix& inputs) {
  require(inputs.cols() == params.input_dim, "model: input column count does not match d");
  if (!inputs.allFinite()) throw NumericError("model: non-finite input");
}

inline ForwardTrace embed_traced(const ModelParams& params, const Matrix& inputs) {
  check_inputs(params, inputs);
  ForwardTrace t;
  t.encoder = forward(params.encoder, inputs);
  t.projection = forward(params.projection, t.encoder.output);
  const Matrix& p = t.projection.output;
  t.norms = p.rowwise().norm();
  t.embeddings.resize(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (!(t.norms(i) > 0.0) || !std::isfinite(t.norms(i))) {
      throw NumericError("embed: projection row " + std::to_string(i) + " has zero or non-finite norm");
    }
    t.embeddings.row(i) = p.row(i) / t.norms(i);
  }
  return t;
}

inline Matrix embed(const ModelParams& params, const Matrix& inputs) {
  return embed_traced(params, inputs).embeddings;
}

struct EmbeddingGradients {
  ModelParams params;  // same layout as the model
  Matrix inputs;       // dL/dx
};

// Chain rule through z = p/|p| (dz/dp = (I - z z^T)/|p|), psi and E.
inline EmbeddingGradients backprop_embedding(const ModelParams& params, const ForwardTrace& trace,
                                             const Matrix& dl_dz) {
  require(dl_dz.rows() == trace.embeddings.rows() && dl_dz.cols() == trace.embeddings.cols(),
          "backprop_embedding: gradient shape does not match embeddings");
  const Matrix& z = trace.embeddings;
  Matrix dl_dp(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double along = z.row(i).dot(dl_dz.row(i));
    dl_dp.row(i) = (dl_dz.row(i) - along * z.row(i)) / trace.norms(i);
  }
  EmbeddingGradients g{zeros_like(params), {}};
  Matrix d_enc = backward(params.projection, trace.projection, std::move(dl_dp), &g.params.projection);
  g.inputs = backward(params.encoder, trace.encoder, std::move(d_enc), &g.params.encoder);
  return g;
}

struct ClassifierTrace {
  MlpTrace encoder;
  MlpTrace classifier;
  Matrix logits;
};

inline ClassifierTrace classify_traced(const ModelParams& params, const Matrix& inputs) {
  check_inputs(params, inputs);
  ClassifierTrace t;
  t.encoder = forward(params.encoder, inputs);
  t.classifier = forward(params.classifier, t.encoder.output);
  t.logits = t.classifier.output;
  return t;
}

inline Matrix classify(const ModelParams& params, const Matrix& inputs) {
  return classify_traced(params, inputs).logits;
}

// Row-wise softmax with max subtraction.
inline Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double peak = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - peak).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

struct CrossEntropy {
  double value = 0.0;  // mean over rows
  Matrix dlogits;
};

// labels are 1..K.
inline CrossEntropy cross_entropy_loss_grad(const Matrix& logits, const Labels& labels) {
  require(static_cast<std::size_t>(logits.rows()) == labels.size() && !labels.empty(),
          "cross_entropy: label count mismatch");
  CrossEntropy ce;
  ce.dlogits = softmax(logits);
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    require(y >= 1 && y <= logits.cols(), "cross_entropy: label outside 1..K");
    const double peak = logits.row(i).maxCoeff();
    const double log_norm = peak + std::log((logits.row(i).array() - peak).exp().sum());
    ce.value += (log_norm - logits(i, y - 1)) * inv_n;
    ce.dlogits(i, y - 1) -= 1.0;
  }
  ce.dlogits *= inv_n;
  return ce;
}

inline ModelParams backprop_classifier(const ModelParams& params, const ClassifierTrace& trace,
                                       const Matrix& dlogits, bool through_encoder) {
  require(dlogits.rows() == trace.logits.rows() && dlogits.cols() == trace.logits.cols(),
          "backprop_classifier: gradient shape mismatch");
  ModelParams g = zeros_like(params);
  Matrix d_enc = backward(params.classifier, trace.classifier, dlogits, &g.classifier);
  if (through_encoder) backward(params.encoder, trace.encoder, std::move(d_enc), &g.encoder);
  return g;
}

// ---- optimization ----

enum class OptimizerKind { kAdam, kSgdMomentum };

inline std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::kAdam ? "adam" : "sgd_momentum";
}

// Linear warmup over warmup_epochs, then cosine decay to zero at total_epochs.
struct LrSchedule {
  double base = 1e-3;
  int warmup_epochs = 10;
  int total_epochs = 600;

  double at(int epoch) const {
    if (epoch < warmup_epochs) {
      return base * static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
    }
    const int span = std::max(1, total_epochs - warmup_epochs);
    const double progress = static_cast<double>(epoch - warmup_epochs) / static_cast<double>(span);
    return 0.5 * base * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
  }
};

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;
  double weight_decay = 1e-4;  // decoupled
};

struct OptimizerState {
  OptimizerSettings settings;
  LrSchedule schedule;
  long step = 0;
  ModelParams first_moment;   // Adam m, or SGD velocity
  ModelParams second_moment;  // Adam v
};

inline OptimizerState make_optimizer(const ModelParams& params, const OptimizerSettings& settings,
                                     const LrSchedule& schedule) {
  return {settings, schedule, 0, zeros_like(params), zeros_like(params)};
}

struct TrainableParts {
  bool encoder = true;
  bool projection = true;
  bool classifier = true;

  bool contains(Part p) const {
    return p == Part::kEncoder ? encoder : p == Part::kProjection ? projection : classifier;
  }
};

// One update at learning rate `lr`. Parts outside `parts` are left untouched,
// including weight decay.
inline void optimizer_step(OptimizerState& state, ModelParams& params, ModelParams& grads, double lr,
                           TrainableParts parts = {}) {
  auto p = tensors(params);
  auto g = tensors(grads);
  auto m = tensors(state.first_moment);
  auto v = tensors(state.second_moment);
  require(p.size() == g.size() && p.size() == m.size(), "optimizer_step: parameter layout mismatch");
  for (std::size_t t = 0; t < p.size(); ++t) {
    require(p[t].size() == g[t].size() && p[t].size() == m[t].size(),
            "optimizer_step: shape mismatch for " + p[t].name);
    if (!parts.contains(p[t].part)) continue;
    for (Eigen::Index i = 0; i < g[t].size(); ++i) {
      if (!std::isfinite(g[t].data[i])) {
        std::ostringstream msg;
        msg << "optimizer_step: non-finite gradient in " << g[t].name << " at flat index " << i
            << " (step " << state.step << ")";
        throw NumericError(msg.str());
      }
    }
  }
  ++state.step;
  const auto& s = state.settings;
  const double bias1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (!parts.contains(p[t].part)) continue;
    double* w = p[t].data;
    const double* grad = g[t].data;
    double* m1 = m[t].data;
    double* m2 = v[t].data;
    for (Eigen::Index i = 0; i < p[t].size(); ++i) {
      if (s.kind == OptimizerKind::kAdam) {
        m1[i] = s.beta1 * m1[i] + (1.0 - s.beta1) * grad[i];
        m2[i] = s.beta2 * m2[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double step = (m1[i] / bias1) / (std::sqrt(m2[i] / bias2) + s.epsilon);
        w[i] -= lr * (step + s.weight_decay * w[i]);
      } else {
        m1[i] = s.momentum * m1[i] + grad[i];
        w[i] -= lr * (m1[i] + s.weight_decay * w[i]);
      }
    }
  }
}

}  // namespace dctau

#endif  // DCTAU_MODEL_HPP_
