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

// TrainConfig and its flat `key = value` text format. Lines starting with
// '#' are comments. Unknown keys are errors.

#ifndef DCTAU_CONFIG_HPP_
#define DCTAU_CONFIG_HPP_

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dctau/common.hpp"
#include "dctau/loss.hpp"
#include "dctau/model.hpp"
#include "dctau/openset.hpp"
#include "dctau/universum.hpp"

namespace dctau {

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// kNone trains with plain supervised contrastive loss and no universum.
enum class UniversumMode { kPlusK, kPlusOne, kNone };

struct TrainConfig {
  std::uint64_t seed = 1;
  // data
  int classes = 10;
  int known = 6;
  std::vector<int> known_ids;  // empty: draw `known` ids from the seed
  int per_class = 200;
  int dim = 8;
  double spread = 2.0;
  double test_fraction = 0.3;
  // universum and loss
  double lambda = kDefaultLambda;
  double gamma = kDefaultGamma;
  double tau = kDefaultTemperature;
  UniversumMode scheme = UniversumMode::kPlusK;
  bool dc = true;
  // rejection
  double percentile = kDefaultPercentile;
  ThresholdMode threshold_mode = ThresholdMode::kPerClass;
  ThresholdRows threshold_rows = ThresholdRows::kCorrectOnly;
  // training
  int epochs_contrastive = 600;
  int epochs_classifier = 20;
  int batch_size = static_cast<int>(kDefaultBatchSize);
  std::vector<int> hidden = {64, 64};
  int proj_dim = 16;
  int classifier_hidden = 0;
  double augment_sigma = 0.1;
  bool multiview = false;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 1e-3;
  double lr_classifier = 1e-2;
  int warmup_epochs = 10;
  double weight_decay = 1e-4;
  double momentum = 0.9;
  bool unfreeze_encoder = false;
  int threads = 1;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("config: '" + key + "' expects a real number, got '" + v + "'");
  }
  return out;
}

template <class Int>
inline Int parse_int(const std::string& key, const std::string& v) {
  Int out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_int<int>(key, item));
  }
  return out;
}

inline std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct ConfigKey {
  const char* name;
  const char* help;
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define DCTAU_INT_KEY(field, help)                                                        \
  ConfigKey {                                                                             \
    #field, help,                                                                         \
        [](TrainConfig& c, const std::string& v) { c.field = parse_int<decltype(c.field)>(#field, v); }, \
        [](const TrainConfig& c) { return std::to_string(c.field); }                     \
  }
#define DCTAU_REAL_KEY(field, help)                                                     \
  ConfigKey {                                                                           \
    #field, help, [](TrainConfig& c, const std::string& v) { c.field = parse_double(#field, v); }, \
        [](const TrainConfig& c) { return format_double(c.field); }                    \
  }
#define DCTAU_BOOL_KEY(field, help)                                                   \
  ConfigKey {                                                                         \
    #field, help, [](TrainConfig& c, const std::string& v) { c.field = parse_bool(#field, v); }, \
        [](const TrainConfig& c) { return std::string(c.field ? "true" : "false"); } \
  }

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      DCTAU_INT_KEY(seed, "master seed for data, initialization and sampling"),
      DCTAU_INT_KEY(classes, "number of blob classes C (>= 2)"),
      DCTAU_INT_KEY(known, "number of known classes K drawn from the seed (1 <= K < C)"),
      ConfigKey{"known_ids", "explicit comma list of known class ids; empty draws `known` at random",
                [](TrainConfig& c, const std::string& v) { c.known_ids = parse_int_list("known_ids", v); },
                [](const TrainConfig& c) { return format_int_list(c.known_ids); }},
      DCTAU_INT_KEY(per_class, "rows generated per class (>= 1)"),
      DCTAU_INT_KEY(dim, "feature dimensionality d (>= 2)"),
      DCTAU_REAL_KEY(spread, "blob standard deviation (>= 0); larger means more overlap"),
      DCTAU_REAL_KEY(test_fraction, "fraction of each known class held out for testing, in (0,1)"),
      DCTAU_REAL_KEY(lambda, "targeted mixup weight of the anchor, in [0,1]"),
      DCTAU_REAL_KEY(gamma, "weight of the universum-anchored loss term (>= 0)"),
      DCTAU_REAL_KEY(tau, "contrastive temperature (> 0)"),
      ConfigKey{"scheme", "pseudo-unknown labeling: k_plus_k | k_plus_one | none (plain supcon)",
                [](TrainConfig& c, const std::string& v) {
                  if (v == "k_plus_k") c.scheme = UniversumMode::kPlusK;
                  else if (v == "k_plus_one") c.scheme = UniversumMode::kPlusOne;
                  else if (v == "none") c.scheme = UniversumMode::kNone;
                  else throw ConfigError("config: scheme must be k_plus_k, k_plus_one or none");
                },
                [](const TrainConfig& c) {
                  return std::string(c.scheme == UniversumMode::kPlusK    ? "k_plus_k"
                                     : c.scheme == UniversumMode::kPlusOne ? "k_plus_one"
                                                                           : "none");
                }},
      DCTAU_BOOL_KEY(dc, "include the universum-anchored term; false keeps the known-anchored term only"),
      DCTAU_REAL_KEY(percentile, "rejection threshold percentile, in (0,100)"),
      ConfigKey{"threshold_mode", "per_class | global",
                [](TrainConfig& c, const std::string& v) {
                  if (v == "per_class") c.threshold_mode = ThresholdMode::kPerClass;
                  else if (v == "global") c.threshold_mode = ThresholdMode::kGlobal;
                  else throw ConfigError("config: threshold_mode must be per_class or global");
                },
                [](const TrainConfig& c) {
                  return std::string(c.threshold_mode == ThresholdMode::kPerClass ? "per_class" : "global");
                }},
      ConfigKey{"threshold_rows", "correct | all: training rows used to fit thresholds",
                [](TrainConfig& c, const std::string& v) {
                  if (v == "correct") c.threshold_rows = ThresholdRows::kCorrectOnly;
                  else if (v == "all") c.threshold_rows = ThresholdRows::kAll;
                  else throw ConfigError("config: threshold_rows must be correct or all");
                },
                [](const TrainConfig& c) {
                  return std::string(c.threshold_rows == ThresholdRows::kCorrectOnly ? "correct" : "all");
                }},
      DCTAU_INT_KEY(epochs_contrastive, "epochs of the contrastive step (>= 0)"),
      DCTAU_INT_KEY(epochs_classifier, "epochs of the classifier step (>= 0)"),
      DCTAU_INT_KEY(batch_size, "rows per batch (>= 2)"),
      ConfigKey{"hidden", "comma list of encoder hidden widths; empty makes the encoder the identity",
                [](TrainConfig& c, const std::string& v) { c.hidden = parse_int_list("hidden", v); },
                [](const TrainConfig& c) { return format_int_list(c.hidden); }},
      DCTAU_INT_KEY(proj_dim, "projection output dimension (>= 1)"),
      DCTAU_INT_KEY(classifier_hidden, "classifier hidden width; 0 is a single linear layer"),
      DCTAU_REAL_KEY(augment_sigma, "std of Gaussian jitter added to each batch (>= 0)"),
      DCTAU_BOOL_KEY(multiview, "use two augmented views per row in the contrastive step"),
      ConfigKey{"optimizer", "adam | sgd_momentum",
                [](TrainConfig& c, const std::string& v) {
                  if (v == "adam") c.optimizer = OptimizerKind::kAdam;
                  else if (v == "sgd_momentum") c.optimizer = OptimizerKind::kSgdMomentum;
                  else throw ConfigError("config: optimizer must be adam or sgd_momentum");
                },
                [](const TrainConfig& c) { return to_string(c.optimizer); }},
      DCTAU_REAL_KEY(lr, "base learning rate of the contrastive step (> 0)"),
      DCTAU_REAL_KEY(lr_classifier, "base learning rate of the classifier step (> 0)"),
      DCTAU_INT_KEY(warmup_epochs, "linear warmup epochs of the contrastive step (>= 0)"),
      DCTAU_REAL_KEY(weight_decay, "decoupled weight decay (>= 0)"),
      DCTAU_REAL_KEY(momentum, "momentum of sgd_momentum, in [0,1)"),
      DCTAU_BOOL_KEY(unfreeze_encoder, "also update the encoder during the classifier step"),
      DCTAU_INT_KEY(threads, "worker threads for sweeps (>= 1)"),
  };
  return keys;
}

#undef DCTAU_INT_KEY
#undef DCTAU_REAL_KEY
#undef DCTAU_BOOL_KEY

}  // namespace detail

inline void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys()) {
    if (key == k.name) {
      k.set(cfg, detail::trim(value));
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

inline std::string get_config_value(const TrainConfig& cfg, const std::string& key) {
  for (const auto& k : detail::config_keys()) {
    if (key == k.name) return k.get(cfg);
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

inline std::vector<std::string> config_key_names() {
  std::vector<std::string> out;
  for (const auto& k : detail::config_keys()) out.emplace_back(k.name);
  return out;
}

inline void validate(const TrainConfig& c) {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("config: " + msg);
  };
  check(c.classes >= 2, "classes must be >= 2");
  if (c.known_ids.empty()) {
    check(c.known >= 1 && c.known < c.classes, "known must satisfy 1 <= known < classes");
  } else {
    check(c.known_ids.size() < static_cast<std::size_t>(c.classes), "known_ids must be a strict subset");
    for (int id : c.known_ids) check(id >= 1 && id <= c.classes, "known_ids entries must be in 1..classes");
  }
  check(c.per_class >= 1, "per_class must be >= 1");
  check(c.dim >= 2, "dim must be >= 2");
  check(c.spread >= 0.0, "spread must be >= 0");
  check(c.test_fraction > 0.0 && c.test_fraction < 1.0, "test_fraction must be in (0,1)");
  check(c.lambda >= 0.0 && c.lambda <= 1.0, "lambda must be in [0,1]");
  check(c.gamma >= 0.0, "gamma must be >= 0");
  check(c.tau > 0.0, "tau must be > 0");
  check(c.percentile > 0.0 && c.percentile < 100.0, "percentile must be in (0,100)");
  check(c.epochs_contrastive >= 0 && c.epochs_classifier >= 0, "epochs must be >= 0");
  check(c.batch_size >= 2, "batch_size must be >= 2");
  for (int h : c.hidden) check(h >= 1, "hidden widths must be >= 1");
  check(c.proj_dim >= 1, "proj_dim must be >= 1");
  check(c.classifier_hidden >= 0, "classifier_hidden must be >= 0");
  check(c.augment_sigma >= 0.0, "augment_sigma must be >= 0");
  check(c.lr > 0.0 && c.lr_classifier > 0.0, "learning rates must be > 0");
  check(c.warmup_epochs >= 0, "warmup_epochs must be >= 0");
  check(c.weight_decay >= 0.0, "weight_decay must be >= 0");
  check(c.momentum >= 0.0 && c.momentum < 1.0, "momentum must be in [0,1)");
  check(c.threads >= 1, "threads must be >= 1");
}

// Applies `key = value` lines on top of `base`.
inline TrainConfig parse_config(std::istream& in, TrainConfig base = {}) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(base, detail::trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  return base;
}

inline TrainConfig load_config_file(const std::string& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  return parse_config(in, std::move(base));
}

inline std::string to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& k : detail::config_keys()) out += std::string(k.name) + " = " + k.get(cfg) + "\n";
  return out;
}

inline LossConfig loss_config(const TrainConfig& cfg, int known_count) {
  LossConfig lc;
  lc.temperature = cfg.tau;
  lc.gamma = cfg.gamma;
  lc.include_universum_term = cfg.dc;
  lc.known_count = known_count;
  lc.scheme = cfg.scheme == UniversumMode::kPlusOne ? PseudoLabelScheme::kPlusOne : PseudoLabelScheme::kPlusK;
  return lc;
}

}  // namespace dctau

#endif  // DCTAU_CONFIG_HPP_
