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

// Two-step training: contrastive representation learning of E and psi,
// then a cross-entropy classifier f on top of E.

#ifndef DCTAU_TRAIN_HPP_
#define DCTAU_TRAIN_HPP_

#include <cmath>
#include <sstream>
#include <vector>

#include "dctau/config.hpp"
#include "dctau/data.hpp"
#include "dctau/loss.hpp"
#include "dctau/model.hpp"
#include "dctau/universum.hpp"

namespace dctau {

inline ModelParams init_params(const TrainConfig& cfg, int input_dim, int known_count) {
  return init_params(input_dim, cfg.hidden, cfg.proj_dim, known_count, cfg.seed, cfg.classifier_hidden);
}

struct ContrastiveRun {
  ModelParams params;
  std::vector<double> history;  // mean per-row loss of each epoch
  std::size_t skipped_batches = 0;
};

struct ClassifierRun {
  ModelParams params;
  std::vector<double> history;  // mean cross-entropy of each epoch
};

// Loss of one contrastive batch and its gradient with respect to the
// stacked network inputs' embeddings. Returned value and gradient are
// normalized by the number of anchor rows.
struct BatchLoss {
  double value = 0.0;
  Matrix grad_embeddings;  // rows: batch rows, then universum rows
};

inline BatchLoss contrastive_batch_loss(const Matrix& embeddings, const Labels& labels,
                                        const Labels& pseudo_labels, const TrainConfig& cfg,
                                        int known_count) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  const LossConfig lc = loss_config(cfg, known_count);
  LossResult r;
  if (cfg.scheme == UniversumMode::kNone) {
    r = supcon_loss_grad(embeddings.topRows(n), labels, lc);
    r.grad_u = Matrix(0, embeddings.cols());
  } else {
    r = dc_total_loss_grad(embeddings.topRows(n), labels, embeddings.bottomRows(embeddings.rows() - n),
                           pseudo_labels, lc);
  }
  const double scale = 1.0 / static_cast<double>(n);
  return {r.value * scale, stack_rows(r.grad_z, r.grad_u) * scale};
}

inline ContrastiveRun train_contrastive(ModelParams params, const OpenSplit& split,
                                        const TrainConfig& cfg, Rng& rng) {
  validate(cfg);
  const int k = split.known_count();
  ContrastiveRun run;
  OptimizerSettings os;
  os.kind = cfg.optimizer;
  os.weight_decay = cfg.weight_decay;
  os.momentum = cfg.momentum;
  OptimizerState opt = make_optimizer(params, os, {cfg.lr, cfg.warmup_epochs, cfg.epochs_contrastive});
  const TrainableParts parts{true, true, false};

  for (int epoch = 0; epoch < cfg.epochs_contrastive; ++epoch) {
    const double lr = opt.schedule.at(epoch);
    const auto batches = epoch_batches(split.train, static_cast<std::size_t>(cfg.batch_size), rng);
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Batch batch = gather_batch(split.train, batches[b]);
      const Batch view = cfg.multiview ? augment_two_views(batch, cfg.augment_sigma, rng)
                                       : augment_gaussian(batch, cfg.augment_sigma, rng);
      Matrix inputs = view.features;
      Labels pseudo;
      if (cfg.scheme != UniversumMode::kNone) {
        const auto scheme = cfg.scheme == UniversumMode::kPlusK ? PseudoLabelScheme::kPlusK
                                                                : PseudoLabelScheme::kPlusOne;
        UniversumBatch ub = assign_pseudo_labels(make_universum(view, k, cfg.lambda, rng), scheme);
        inputs = stack_rows(view.features, ub.features);
        pseudo = std::move(ub.labels);
      }
      const ForwardTrace trace = embed_traced(params, inputs);
      BatchLoss loss;
      try {
        loss = contrastive_batch_loss(trace.embeddings, view.labels, pseudo, cfg, k);
      } catch (const DegenerateBatch&) {
        ++run.skipped_batches;
        continue;
      }
      if (!std::isfinite(loss.value)) {
        std::ostringstream msg;
        msg << "train_contrastive: non-finite loss at epoch " << epoch << ", batch " << b;
        throw NumericError(msg.str());
      }
      EmbeddingGradients g = backprop_embedding(params, trace, loss.grad_embeddings);
      optimizer_step(opt, params, g.params, lr, parts);
      sum += loss.value;
      ++used;
    }
    run.history.push_back(used ? sum / static_cast<double>(used) : 0.0);
  }
  run.params = std::move(params);
  return run;
}

inline ContrastiveRun train_contrastive(const OpenSplit& split, const TrainConfig& cfg, Rng& rng) {
  return train_contrastive(init_params(cfg, static_cast<int>(split.train.dim()), split.known_count()),
                           split, cfg, rng);
}

// Cross-entropy training of the classifier on clean training rows. The
// encoder and projection stay frozen unless unfreeze_encoder is set.
inline ClassifierRun train_classifier(ModelParams params, const OpenSplit& split,
                                      const TrainConfig& cfg, Rng& rng) {
  validate(cfg);
  ClassifierRun run;
  OptimizerSettings os;
  os.kind = cfg.optimizer;
  os.weight_decay = cfg.weight_decay;
  os.momentum = cfg.momentum;
  OptimizerState opt = make_optimizer(params, os, {cfg.lr_classifier, 0, cfg.epochs_classifier});
  const TrainableParts parts{cfg.unfreeze_encoder, false, true};

  for (int epoch = 0; epoch < cfg.epochs_classifier; ++epoch) {
    const double lr = opt.schedule.at(epoch);
    const auto batches = epoch_batches(split.train, static_cast<std::size_t>(cfg.batch_size), rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Batch batch = gather_batch(split.train, batches[b]);
      const ClassifierTrace trace = classify_traced(params, batch.features);
      const CrossEntropy ce = cross_entropy_loss_grad(trace.logits, batch.labels);
      if (!std::isfinite(ce.value)) {
        std::ostringstream msg;
        msg << "train_classifier: non-finite loss at epoch " << epoch << ", batch " << b;
        throw NumericError(msg.str());
      }
      ModelParams grads = backprop_classifier(params, trace, ce.dlogits, cfg.unfreeze_encoder);
      optimizer_step(opt, params, grads, lr, parts);
      sum += ce.value;
    }
    run.history.push_back(batches.empty() ? 0.0 : sum / static_cast<double>(batches.size()));
  }
  run.params = std::move(params);
  return run;
}

}  // namespace dctau

#endif  // DCTAU_TRAIN_HPP_
