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

// Command-line harness: generate, train, eval, ablate, verify.
//
// Exit codes: 0 success, 2 invalid configuration or arguments, 3 numeric
// failure (including failed verification), 4 I/O failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dctau/checkpoint.hpp"
#include "dctau/config.hpp"
#include "dctau/experiment.hpp"
#include "dctau/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dctau {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct Globals {
  std::string config_path;
  std::string out = "out";
  bool quiet = false;
  std::map<std::string, std::string> overrides;  // config key -> raw value
};

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed json in " + path.string() + ": " + e.what());
  }
}

// defaults < base (e.g. a checkpoint sidecar) < --config file < flags.
TrainConfig effective_config(const Globals& g, const TrainConfig& base = {}) {
  TrainConfig cfg = base;
  if (!g.config_path.empty()) cfg = load_config_file(g.config_path, cfg);
  for (const auto& [key, value] : g.overrides) set_config_value(cfg, key, value);
  validate(cfg);
  return cfg;
}

void echo_config(const Globals& g, const TrainConfig& cfg) {
  ensure_dir(g.out);
  write_text(fs::path(g.out) / "config.txt", to_text(cfg));
  if (!g.quiet) std::cout << "# effective config\n" << to_text(cfg) << std::flush;
}

void log(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

// A split either regenerated from the config or read from a generate output
// directory.
OpenSplit load_split(const std::string& data_dir, const TrainConfig& cfg) {
  if (data_dir.empty()) return make_split(cfg);
  const fs::path dir(data_dir);
  const json manifest = read_json(dir / "manifest.json");
  OpenSplit s;
  s.known_ids = manifest.at("known_ids").get<std::vector<int>>();
  s.unknown_ids = manifest.at("unknown_ids").get<std::vector<int>>();
  s.train = read_csv_file((dir / "train.csv").string());
  s.test_known = read_csv_file((dir / "test_known.csv").string());
  s.test_unknown = read_csv_file((dir / "test_unknown.csv").string());
  s.train.class_count = s.known_count();
  s.test_known.class_count = s.known_count();
  validate_dataset(s.train);
  return s;
}

json sidecar(const TrainConfig& cfg, const std::string& stage, const std::string& data_dir) {
  json j;
  j["stage"] = stage;
  j["seed"] = cfg.seed;
  j["data"] = data_dir;
  j["config"] = config_json(cfg);
  return j;
}

void write_checkpoint(const fs::path& bin, const ModelParams& p, const json& meta) {
  save_checkpoint_file(bin.string(), p);
  fs::path side = bin;
  side.replace_extension(".json");
  write_text(side, meta.dump(2) + "\n");
}

json read_sidecar(const std::string& checkpoint) {
  fs::path side(checkpoint);
  side.replace_extension(".json");
  return read_json(side);
}

// ---- commands ----

int cmd_generate(const Globals& g) {
  const TrainConfig cfg = effective_config(g);
  echo_config(g, cfg);
  const OpenSplit split = make_split(cfg);
  const fs::path dir(g.out);
  write_csv_file((dir / "train.csv").string(), split.train.features, split.train.labels);
  write_csv_file((dir / "test_known.csv").string(), split.test_known.features, split.test_known.labels);
  write_csv_file((dir / "test_unknown.csv").string(), split.test_unknown.features, split.test_unknown.labels);
  json m;
  m["seed"] = cfg.seed;
  m["known_ids"] = split.known_ids;
  m["unknown_ids"] = split.unknown_ids;
  m["dim"] = cfg.dim;
  m["rows"] = {{"train.csv", split.train.size()},
               {"test_known.csv", split.test_known.size()},
               {"test_unknown.csv", split.test_unknown.size()}};
  m["config"] = config_json(cfg);
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  log(g, "wrote " + std::to_string(split.train.size()) + " train, " + std::to_string(split.test_known.size()) +
             " test_known, " + std::to_string(split.test_unknown.size()) + " test_unknown rows to " + g.out);
  return kExitOk;
}

void write_history(const fs::path& path, const std::vector<double>& contrastive,
                   const std::vector<double>& classifier) {
  std::ofstream out = open_out(path);
  out << "stage,epoch,loss\n";
  out.precision(17);
  for (std::size_t e = 0; e < contrastive.size(); ++e) out << "contrastive," << e << ',' << contrastive[e] << '\n';
  for (std::size_t e = 0; e < classifier.size(); ++e) out << "classifier," << e << ',' << classifier[e] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

int cmd_train(const Globals& g, const std::string& data_dir, const std::string& resume) {
  TrainConfig base;
  std::string stage = "none";
  std::optional<ModelParams> resumed;
  std::string data = data_dir;
  if (!resume.empty()) {
    const json meta = read_sidecar(resume);
    base = config_from_json(meta.at("config"));
    stage = meta.at("stage").get<std::string>();
    if (data.empty()) data = meta.value("data", "");
    resumed = load_checkpoint_file(resume);
  }
  const TrainConfig cfg = effective_config(g, base);
  echo_config(g, cfg);
  const OpenSplit split = load_split(data, cfg);
  const SeedPlan seeds(cfg.seed);
  const fs::path dir(g.out);

  std::vector<double> contrastive_history;
  ModelParams params;
  if (resumed && (stage == "contrastive" || stage == "full")) {
    params = std::move(*resumed);
    log(g, "resuming after the contrastive step from " + resume);
  } else {
    Rng rng(seeds.train);
    ContrastiveRun run = train_contrastive(split, cfg, rng);
    params = std::move(run.params);
    contrastive_history = std::move(run.history);
    if (run.skipped_batches) log(g, "skipped " + std::to_string(run.skipped_batches) + " degenerate batches");
    write_checkpoint(dir / "contrastive.bin", params, sidecar(cfg, "contrastive", data));
    if (!contrastive_history.empty()) {
      log(g, "contrastive loss " + detail::format_double(contrastive_history.front()) + " -> " +
                 detail::format_double(contrastive_history.back()));
    }
  }
  Rng rng(seeds.classifier);
  ClassifierRun f = train_classifier(std::move(params), split, cfg, rng);
  write_checkpoint(dir / "checkpoint.bin", f.params, sidecar(cfg, "full", data));
  write_history(dir / "history.csv", contrastive_history, f.history);
  if (!g.quiet && !contrastive_history.empty()) {
    std::cout.precision(17);
    std::cout << "final_contrastive_loss = " << contrastive_history.back() << '\n';
  }
  return kExitOk;
}

void write_embeddings(const fs::path& path, const ModelParams& params, const OpenSplit& split) {
  const Matrix z = embed(params, stack_rows(split.test_known.features, split.test_unknown.features));
  Labels labels = split.test_known.labels;
  labels.insert(labels.end(), split.test_unknown.labels.begin(), split.test_unknown.labels.end());
  std::ofstream out = open_out(path);
  write_csv(out, z, labels);
  if (!out) throw IoError("write failed: " + path.string());
}

// Per-anchor negative weights of one universum-augmented training batch.
void write_weights(const fs::path& path, const ModelParams& params, const OpenSplit& split,
                   const TrainConfig& cfg) {
  Rng rng(SeedPlan(cfg.seed).train);
  const int k = split.known_count();
  const Batch batch = sample_batch(split.train, std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                                   split.train.size()),
                                   rng);
  const auto scheme = cfg.scheme == UniversumMode::kPlusOne ? PseudoLabelScheme::kPlusOne : PseudoLabelScheme::kPlusK;
  const UniversumBatch ub = assign_pseudo_labels(make_universum(batch, k, cfg.lambda, rng), scheme);
  const Matrix z = embed(params, batch.features);
  const Matrix u = embed(params, ub.features);
  const KnownLossOutput out = dc_known_loss_grad(z, batch.labels, u, ub.labels, loss_config(cfg, k));
  std::ofstream file = open_out(path);
  write_weight_table(file, out.decomposition);
}

int cmd_eval(const Globals& g, const std::string& checkpoint, const std::string& data_dir, bool weights) {
  const std::string ckpt = checkpoint.empty() ? (fs::path(g.out) / "checkpoint.bin").string() : checkpoint;
  const json meta = read_sidecar(ckpt);
  const TrainConfig cfg = effective_config(g, config_from_json(meta.at("config")));
  echo_config(g, cfg);
  const std::string data = data_dir.empty() ? meta.value("data", "") : data_dir;
  const OpenSplit split = load_split(data, cfg);
  const ModelParams params = load_checkpoint_file(ckpt);
  if (params.input_dim != split.train.dim() || params.class_count() != split.known_count()) {
    throw ConfigError("eval: checkpoint shape does not match the split (dim or K differ)");
  }
  const EvalReport r = evaluate(params, split, cfg);
  const fs::path dir(g.out);
  write_text(dir / "report.json", report_json(r).dump(2) + "\n");
  {
    std::ofstream out = open_out(dir / "oscr_curve.csv");
    write_curve_csv(out, r.curve);
  }
  {
    std::ofstream out = open_out(dir / "thresholds.csv");
    write_threshold_csv(out, r.thresholds);
  }
  write_embeddings(dir / "embeddings.csv", params, split);
  if (weights) write_weights(dir / "weights.csv", params, split, cfg);
  if (!g.quiet) {
    std::cout << "auroc = " << r.auroc << "\noscr = " << r.oscr << "\nmacro_f1 = " << r.macro_f1
              << "\nclosed_accuracy = " << r.closed_accuracy << '\n';
  }
  return kExitOk;
}

int cmd_ablate(const Globals& g, const std::string& sweep, std::vector<std::string> values, int repeats) {
  const SweepKey key = parse_sweep_key(sweep);
  const TrainConfig cfg = effective_config(g);
  echo_config(g, cfg);
  if (values.empty()) values = default_sweep_values(key);
  const auto start = std::chrono::steady_clock::now();
  const auto rows = run_sweep(cfg, key, values, repeats);
  const fs::path dir(g.out);
  {
    std::ofstream out = open_out(dir / "sweep.csv");
    write_sweep_csv(out, sweep, rows);
  }
  {
    std::ofstream out = open_out(dir / "sweep_runs.csv");
    write_sweep_runs_csv(out, sweep, rows);
  }
  if (!g.quiet) {
    write_sweep_csv(std::cout, sweep, rows);
    std::cout << "# " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
              << " s\n";
  }
  return kExitOk;
}

int cmd_verify(const Globals& g) {
  const auto start = std::chrono::steady_clock::now();
  const auto results = verify::run_all();
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.passed;
    if (!g.quiet || !r.passed) {
      std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << (ok ? "all checks passed" : "verification FAILED") << " in " << secs << " s\n";
  return ok ? kExitOk : kExitNumeric;
}

int run(int argc, char** argv) {
  CLI::App app{"dctau: open-set recognition with targeted mixup universum contrastive learning"};
  app.require_subcommand(1, 1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "suppress progress and config echo");
  auto* keys = app.add_option_group("config keys", "override any config key (flags win over --config)");
  std::map<std::string, std::string> raw;
  for (const auto& k : detail::config_keys()) {
    keys->add_option(flag_name(k.name), raw[k.name],
                     std::string(k.help) + " [default: " + k.get(TrainConfig{}) + "]")
        ->type_name("VALUE");
  }

  auto* generate = app.add_subcommand("generate", "write train/test_known/test_unknown CSVs and a manifest");
  auto* train = app.add_subcommand("train", "run both training steps; writes checkpoint.bin and history.csv");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint; writes report.json and curves");
  auto* ablate = app.add_subcommand("ablate", "sweep one setting over several seeds");
  auto* verify_cmd = app.add_subcommand("verify", "run the gradient, identity and metric oracle suite");
  for (auto* sub : {generate, train, eval, ablate, verify_cmd}) sub->fallthrough();

  std::string data_dir, resume, checkpoint, sweep;
  bool weights = false;
  std::vector<std::string> values;
  int repeats = 5;
  train->add_option("--data", data_dir, "read the split from a generate output directory");
  train->add_option("--resume", resume, "continue from a checkpoint written by train");
  eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate [default: <out>/checkpoint.bin]");
  eval->add_option("--data", data_dir, "read the split from a generate output directory");
  eval->add_flag("--weights", weights, "also write per-anchor negative weights of one batch");
  ablate->add_option("--sweep", sweep, "lambda | gamma | scheme | percentile")->required();
  ablate->add_option("--values", values, "comma separated values [default: built-in grid]")->delimiter(',');
  ablate->add_option("--repeats", repeats, "seeds per value, starting at --seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  for (const auto& key : config_key_names()) {
    if (keys->get_option(flag_name(key))->count() > 0) g.overrides[key] = raw[key];
  }

  try {
    if (*generate) return cmd_generate(g);
    if (*train) return cmd_train(g, data_dir, resume);
    if (*eval) return cmd_eval(g, checkpoint, data_dir, weights);
    if (*ablate) return cmd_ablate(g, sweep, values, repeats);
    return cmd_verify(g);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed metadata: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace
}  // namespace dctau

int main(int argc, char** argv) { return dctau::run(argc, argv); }
