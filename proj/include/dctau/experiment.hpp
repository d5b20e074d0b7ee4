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

// End-to-end runs: data -> two-step training -> open-set evaluation, and
// hyper-parameter sweeps over them.

#ifndef DCTAU_EXPERIMENT_HPP_
#define DCTAU_EXPERIMENT_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <cmath>
#include <future>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dctau/config.hpp"
#include "dctau/data.hpp"
#include "dctau/metrics.hpp"
#include "dctau/model.hpp"
#include "dctau/openset.hpp"
#include "dctau/train.hpp"

namespace dctau {

// Independent streams derived from the master seed.
struct SeedPlan {
  std::uint64_t data, known, split, train, classifier;

  explicit SeedPlan(std::uint64_t seed)
      : data(seed),
        known(seed * 0x100000001b3ULL + 1),
        split(seed * 0x100000001b3ULL + 2),
        train(seed * 0x100000001b3ULL + 3),
        classifier(seed * 0x100000001b3ULL + 4) {}
};

inline std::vector<int> resolve_known_ids(const TrainConfig& cfg) {
  if (!cfg.known_ids.empty()) return cfg.known_ids;
  return choose_known_ids(cfg.classes, cfg.known, SeedPlan(cfg.seed).known);
}

inline OpenSplit make_split(const TrainConfig& cfg) {
  validate(cfg);
  const SeedPlan seeds(cfg.seed);
  const Dataset ds = generate_blobs(cfg.classes, cfg.per_class, cfg.dim, cfg.spread, seeds.data);
  return split_open_set(ds, resolve_known_ids(cfg), cfg.test_fraction, seeds.split);
}

struct EvalReport {
  double auroc = 0.0;
  double oscr = 0.0;
  double macro_f1 = 0.0;
  double closed_accuracy = 0.0;
  ThresholdTable thresholds;
  TrainConfig config;
  double seconds = 0.0;
  std::vector<CurvePoint> curve;
};

inline Matrix posteriors(const ModelParams& params, const Matrix& inputs) {
  return softmax(classify(params, inputs));
}

inline EvalReport evaluate(const ModelParams& params, const OpenSplit& split, const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  EvalReport r;
  r.config = cfg;
  const Matrix train_post = posteriors(params, split.train.features);
  r.thresholds = fit_thresholds(train_post, split.train.labels, cfg.percentile, cfg.threshold_mode,
                                cfg.threshold_rows);

  const Matrix known_post = posteriors(params, split.test_known.features);
  const Matrix unknown_post = posteriors(params, split.test_unknown.features);
  std::vector<double> known_conf, unknown_conf;
  Labels predicted, truth, closed;
  for (Eigen::Index i = 0; i < known_post.rows(); ++i) {
    known_conf.push_back(known_post.row(i).maxCoeff());
    closed.push_back(argmax_label(known_post.row(i)));
    predicted.push_back(predict_open(known_post.row(i), r.thresholds).label);
    truth.push_back(split.test_known.labels[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index i = 0; i < unknown_post.rows(); ++i) {
    unknown_conf.push_back(unknown_post.row(i).maxCoeff());
    predicted.push_back(predict_open(unknown_post.row(i), r.thresholds).label);
    truth.push_back(kUnknownLabel);
  }
  r.auroc = auroc(known_conf, unknown_conf);
  OscrResult o = oscr_curve(known_post, split.test_known.labels, unknown_post);
  r.oscr = o.area;
  r.curve = std::move(o.curve);
  r.macro_f1 = macro_f1(predicted, truth, split.known_count());
  r.closed_accuracy = closed_accuracy(closed, split.test_known.labels);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

struct TrainedModel {
  ModelParams params;
  std::vector<double> contrastive_history;
  std::vector<double> classifier_history;
};

// Both training steps from a fresh initialization.
inline TrainedModel train_model(const OpenSplit& split, const TrainConfig& cfg) {
  const SeedPlan seeds(cfg.seed);
  Rng contrastive_rng(seeds.train);
  ContrastiveRun c = train_contrastive(split, cfg, contrastive_rng);
  Rng classifier_rng(seeds.classifier);
  ClassifierRun f = train_classifier(std::move(c.params), split, cfg, classifier_rng);
  return {std::move(f.params), std::move(c.history), std::move(f.history)};
}

struct ExperimentResult {
  TrainedModel model;
  EvalReport report;
};

inline ExperimentResult run_experiment(const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const OpenSplit split = make_split(cfg);
  ExperimentResult out{train_model(split, cfg), {}};
  out.report = evaluate(out.model.params, split, cfg);
  out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline nlohmann::json config_json(const TrainConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& key : config_key_names()) j[key] = get_config_value(cfg, key);
  return j;
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  for (auto it = j.begin(); it != j.end(); ++it) set_config_value(cfg, it.key(), it.value().get<std::string>());
  validate(cfg);
  return cfg;
}

inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json j;
  j["auroc"] = r.auroc;
  j["oscr"] = r.oscr;
  j["macro_f1"] = r.macro_f1;
  j["closed_accuracy"] = r.closed_accuracy;
  j["percentile"] = r.thresholds.percentile;
  j["thresholds"] = r.thresholds.thresholds;
  j["config"] = config_json(r.config);
  j["seconds"] = r.seconds;
  return j;
}

// ---- sweeps ----

enum class SweepKey { kLambda, kGamma, kScheme, kPercentile };

inline SweepKey parse_sweep_key(const std::string& s) {
  if (s == "lambda") return SweepKey::kLambda;
  if (s == "gamma") return SweepKey::kGamma;
  if (s == "scheme") return SweepKey::kScheme;
  if (s == "percentile") return SweepKey::kPercentile;
  throw ConfigError("ablate: invalid sweep key '" + s + "' (lambda | gamma | scheme | percentile)");
}

inline std::string sweep_config_key(SweepKey k) {
  switch (k) {
    case SweepKey::kLambda: return "lambda";
    case SweepKey::kGamma: return "gamma";
    case SweepKey::kScheme: return "scheme";
    case SweepKey::kPercentile: return "percentile";
  }
  return {};
}

inline std::vector<std::string> default_sweep_values(SweepKey k) {
  switch (k) {
    case SweepKey::kLambda: return {"0.1", "0.3", "0.5", "0.7", "0.9"};
    case SweepKey::kGamma: return {"0", "0.5", "1", "2"};
    case SweepKey::kScheme: return {"k_plus_one", "k_plus_k", "none"};
    case SweepKey::kPercentile: return {"1", "3", "5", "7", "9", "11", "13", "15"};
  }
  return {};
}

struct SweepRun {
  std::string value;
  std::uint64_t seed = 0;
  EvalReport report;
};

struct SweepRow {
  std::string value;
  std::vector<SweepRun> runs;  // one per repeat, seeds base, base+1, ...

  double mean(double EvalReport::*field) const {
    double s = 0.0;
    for (const auto& r : runs) s += r.report.*field;
    return s / static_cast<double>(runs.size());
  }
};

// Runs `repeats` seeds per value. Percentile sweeps reuse one trained model
// per seed. Rows come back in input order whatever the thread count.
inline std::vector<SweepRow> run_sweep(const TrainConfig& base, SweepKey key,
                                       const std::vector<std::string>& values, int repeats) {
  require(!values.empty(), "ablate: sweep values must be non-empty");
  require(repeats >= 1, "ablate: repeats must be >= 1");
  const std::string config_key = sweep_config_key(key);
  std::vector<TrainConfig> configs;
  for (const auto& v : values) {
    TrainConfig c = base;
    set_config_value(c, config_key, v);
    validate(c);
    configs.push_back(c);
  }

  std::vector<SweepRow> rows(values.size());
  for (std::size_t v = 0; v < values.size(); ++v) {
    rows[v].value = values[v];
    rows[v].runs.resize(static_cast<std::size_t>(repeats));
  }

  // One job per (seed) for percentile, per (value, seed) otherwise.
  std::vector<std::function<void()>> jobs;
  for (int rep = 0; rep < repeats; ++rep) {
    const std::uint64_t seed = base.seed + static_cast<std::uint64_t>(rep);
    const auto r = static_cast<std::size_t>(rep);
    if (key == SweepKey::kPercentile) {
      jobs.push_back([&, seed, r] {
        TrainConfig c = base;
        c.seed = seed;
        const OpenSplit split = make_split(c);
        const TrainedModel m = train_model(split, c);
        for (std::size_t v = 0; v < configs.size(); ++v) {
          TrainConfig cv = configs[v];
          cv.seed = seed;
          rows[v].runs[r] = {values[v], seed, evaluate(m.params, split, cv)};
        }
      });
    } else {
      for (std::size_t v = 0; v < configs.size(); ++v) {
        jobs.push_back([&, seed, r, v] {
          TrainConfig c = configs[v];
          c.seed = seed;
          rows[v].runs[r] = {values[v], seed, run_experiment(c).report};
        });
      }
    }
  }

  const auto workers = static_cast<std::size_t>(std::max(1, base.threads));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) jobs[j]();
  };
  std::vector<std::future<void>> pool;
  for (std::size_t w = 1; w < std::min(workers, jobs.size()); ++w) pool.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pool) f.get();
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::string& key, const std::vector<SweepRow>& rows) {
  out << key << ",repeats,auroc,oscr,macro_f1,closed_accuracy,auroc_std\n";
  out.precision(10);
  for (const auto& row : rows) {
    const double mean_auroc = row.mean(&EvalReport::auroc);
    double var = 0.0;
    for (const auto& r : row.runs) var += (r.report.auroc - mean_auroc) * (r.report.auroc - mean_auroc);
    var /= static_cast<double>(row.runs.size());
    out << row.value << ',' << row.runs.size() << ',' << mean_auroc << ',' << row.mean(&EvalReport::oscr)
        << ',' << row.mean(&EvalReport::macro_f1) << ',' << row.mean(&EvalReport::closed_accuracy) << ','
        << std::sqrt(var) << '\n';
  }
}

inline void write_sweep_runs_csv(std::ostream& out, const std::string& key, const std::vector<SweepRow>& rows) {
  out << key << ",seed,auroc,oscr,macro_f1,closed_accuracy,seconds\n";
  out.precision(10);
  for (const auto& row : rows) {
    for (const auto& r : row.runs) {
      out << r.value << ',' << r.seed << ',' << r.report.auroc << ',' << r.report.oscr << ','
          << r.report.macro_f1 << ',' << r.report.closed_accuracy << ',' << r.report.seconds << '\n';
    }
  }
}

}  // namespace dctau

#endif  // DCTAU_EXPERIMENT_HPP_
