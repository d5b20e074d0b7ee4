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

// End-to-end runs of the command-line tool.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "dctau/checkpoint.hpp"
#include "dctau/data.hpp"
#include "gtest/gtest.h"

namespace fs = std::filesystem;

namespace dctau {
namespace {

const char* kSmall =
    " --classes 5 --known 3 --per-class 30 --dim 4 --spread 0.5 --hidden 16 --proj-dim 8"
    " --batch-size 32 --warmup-epochs 1 --quiet";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dctau_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args, const std::string& out_name = "out") const {
    const std::string cmd = std::string(DCTAU_CLI_PATH) + " " + args + " --out " + (dir_ / out_name).string() +
                            " > " + (dir_ / "stdout.txt").string() + " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const fs::path& p) const {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::size_t lines(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
  }

  fs::path dir_;
};

TEST_F(CliTest, GenerateIsDeterministicAndConsistent) {
  ASSERT_EQ(run(std::string("generate --seed 4 --classes 10 --known 6 --per-class 20 --quiet"), "a"), 0);
  ASSERT_EQ(run(std::string("generate --seed 4 --classes 10 --known 6 --per-class 20 --quiet"), "b"), 0);
  const auto manifest = nlohmann::json::parse(read(dir_ / "a" / "manifest.json"));
  std::set<int> known_labels, unknown_labels;
  for (const char* name : {"train.csv", "test_known.csv", "test_unknown.csv"}) {
    const std::string a = read(dir_ / "a" / name);
    EXPECT_EQ(a, read(dir_ / "b" / name)) << name;
    EXPECT_EQ(lines(a) - 1, manifest["rows"][name].get<std::size_t>()) << name;
    const Dataset ds = read_csv_file((dir_ / "a" / name).string());
    auto& target = std::string(name) == "test_unknown.csv" ? unknown_labels : known_labels;
    target.insert(ds.labels.begin(), ds.labels.end());
  }
  EXPECT_EQ(known_labels, (std::set<int>{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(unknown_labels, (std::set<int>{kUnknownLabel}));
  EXPECT_EQ(manifest["known_ids"].size(), 6u);
  EXPECT_EQ(manifest["unknown_ids"].size(), 4u);
}

TEST_F(CliTest, ZeroEpochCheckpointEqualsInitialization) {
  ASSERT_EQ(run(std::string("train --epochs-contrastive 0 --epochs-classifier 0") + kSmall), 0);
  const ModelParams p = load_checkpoint_file((dir_ / "out" / "checkpoint.bin").string());
  const ModelParams init = init_params(4, {16}, 8, 3, 1);
  EXPECT_EQ(p.encoder.layers[0].weight, init.encoder.layers[0].weight);
  EXPECT_EQ(p.projection.layers[1].weight, init.projection.layers[1].weight);
  EXPECT_EQ(p.classifier.layers[0].weight, init.classifier.layers[0].weight);
}

TEST_F(CliTest, TrainHistoryAndRerunReproducesLoss) {
  const std::string args = std::string("train --epochs-contrastive 3 --epochs-classifier 2") + kSmall;
  ASSERT_EQ(run(args, "a"), 0);
  ASSERT_EQ(run(args, "b"), 0);
  const std::string history = read(dir_ / "a" / "history.csv");
  EXPECT_EQ(lines(history), 1u + 3u + 2u);
  EXPECT_EQ(history, read(dir_ / "b" / "history.csv"));
  EXPECT_EQ(read(dir_ / "a" / "checkpoint.bin"), read(dir_ / "b" / "checkpoint.bin"));
  const auto side = nlohmann::json::parse(read(dir_ / "a" / "checkpoint.json"));
  EXPECT_EQ(side["stage"], "full");
  EXPECT_EQ(side["config"]["epochs_contrastive"], "3");
}

TEST_F(CliTest, ResumeSkipsContrastiveStep) {
  const std::string args = std::string("train --epochs-contrastive 3 --epochs-classifier 2") + kSmall;
  ASSERT_EQ(run(args, "a"), 0);
  ASSERT_EQ(run("train --quiet --resume " + (dir_ / "a" / "contrastive.bin").string(), "b"), 0);
  EXPECT_EQ(read(dir_ / "a" / "checkpoint.bin"), read(dir_ / "b" / "checkpoint.bin"));
  EXPECT_EQ(lines(read(dir_ / "b" / "history.csv")), 1u + 2u);
}

TEST_F(CliTest, EvalWritesReportCurvesAndEmbeddings) {
  ASSERT_EQ(run(std::string("train --epochs-contrastive 2 --epochs-classifier 2") + kSmall), 0);
  ASSERT_EQ(run("eval --quiet --weights"), 0);
  const auto report = nlohmann::json::parse(read(dir_ / "out" / "report.json"));
  for (const char* key : {"auroc", "oscr", "macro_f1", "closed_accuracy"}) {
    EXPECT_GE(report[key].get<double>(), 0.0);
    EXPECT_LE(report[key].get<double>(), 1.0);
  }
  EXPECT_EQ(report["config"]["per_class"], "30");
  EXPECT_EQ(report["thresholds"].size(), 3u);
  EXPECT_EQ(read(dir_ / "out" / "oscr_curve.csv").substr(0, 14), "delta,ccr,fpr\n");
  EXPECT_EQ(read(dir_ / "out" / "thresholds.csv").substr(0, 14), "# percentile=5");
  const Dataset emb = read_csv_file((dir_ / "out" / "embeddings.csv").string());
  EXPECT_EQ(emb.features.cols(), 8);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "weights.csv"));
}

TEST_F(CliTest, EvalOnGeneratedData) {
  const std::string data = (dir_ / "data").string();
  ASSERT_EQ(run(std::string("generate") + kSmall, "data"), 0);
  ASSERT_EQ(run(std::string("train --epochs-contrastive 1 --epochs-classifier 1 --data ") + data + kSmall), 0);
  ASSERT_EQ(run("eval --quiet --data " + data), 0);
  EXPECT_TRUE(fs::exists(dir_ / "out" / "report.json"));
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  const fs::path cfg = dir_ / "run.cfg";
  std::ofstream(cfg) << "lambda = 0.3\nseed = 9\n";
  ASSERT_EQ(run("generate --per-class 5 --config " + cfg.string() + " --seed 2"), 0);
  const std::string echoed = read(dir_ / "out" / "config.txt");
  EXPECT_NE(echoed.find("lambda = 0.3\n"), std::string::npos);
  EXPECT_NE(echoed.find("seed = 2\n"), std::string::npos);
  EXPECT_NE(read(dir_ / "stdout.txt").find("seed = 2"), std::string::npos);
}

TEST_F(CliTest, AblateEmitsOneRowPerValue) {
  ASSERT_EQ(run(std::string("ablate --sweep lambda --repeats 1 --epochs-contrastive 1 --epochs-classifier 1") + kSmall),
            0);
  const std::string sweep = read(dir_ / "out" / "sweep.csv");
  EXPECT_EQ(lines(sweep), 6u);
  EXPECT_EQ(sweep.substr(0, 7), "lambda,");
  EXPECT_EQ(lines(read(dir_ / "out" / "sweep_runs.csv")), 6u);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("train --tau 0 --quiet"), 2);
  EXPECT_EQ(run("train --scheme k_plus_2k --quiet"), 2);
  EXPECT_EQ(run("ablate --sweep temperature --quiet"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("eval --quiet --checkpoint " + (dir_ / "missing.bin").string()), 4);
  const fs::path cfg = dir_ / "typo.cfg";
  std::ofstream(cfg) << "lamda = 0.3\n";
  EXPECT_EQ(run("generate --config " + cfg.string()), 2);
}

TEST_F(CliTest, VerifyPasses) {
  EXPECT_EQ(run("verify"), 0);
  const std::string out = read(dir_ / "stdout.txt");
  EXPECT_NE(out.find("all checks passed"), std::string::npos);
  EXPECT_EQ(out.find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace dctau
