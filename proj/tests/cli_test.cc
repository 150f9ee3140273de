// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the xlog executable end to end on a small synthetic log.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>
#include <sstream>

#include "xlog/report.hpp"

#ifndef XLOG_BINARY
#error "XLOG_BINARY must name the xlog executable"
#endif

namespace xlog {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  static fs::path root() { return fs::temp_directory_path() / ("xlog_cli_test_" + std::to_string(::getpid())); }

  // One shared workspace: synthetic log, ingest and a small forest.
  static void SetUpTestSuite() {
    fs::remove_all(root());
    fs::create_directories(root());
    ASSERT_EQ(Run("--out " + Q(root() / "syn") + " synth --seed 2"), 0);
    ASSERT_EQ(Run("--out " + Q(root() / "ws") + " ingest --csv " + Q(root() / "syn" / "synthetic.csv") + " --window 8 --seed 2"), 0);
    ASSERT_EQ(Run("--out " + Q(root() / "rf") + " train --data " + Q(root() / "ws") + " --model forest --trees 25"), 0);
  }

  static void TearDownTestSuite() { fs::remove_all(root()); }

  static std::string Q(const fs::path& p) { return "\"" + p.string() + "\""; }

  static int Run(const std::string& args) {
    const std::string cmd = std::string("\"") + XLOG_BINARY + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::map<std::string, std::string> Files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_file(e.path());
    return out;
  }

  static nlohmann::json Json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }
};

TEST_F(Cli, IngestWritesContainersAndReport) {
  const auto ws = root() / "ws";
  for (const char* name : {"cleaning.json", "correlation.json", "vocab.json", "dataset.json", "sequences.xlg", "flat.xlg"}) {
    EXPECT_TRUE(fs::exists(ws / name)) << name;
  }
  const auto cleaning = Json(ws / "cleaning.json");
  EXPECT_EQ(cleaning["imputed_labels"], 0);
  EXPECT_EQ(cleaning["cases"], 150);
  EXPECT_EQ(cleaning["provenance"]["seed"], 2);
  EXPECT_EQ(read_file(ws / "sequences.xlg").substr(0, 4), "XLG1");
}

TEST_F(Cli, ImputesOneUnlabeledCase) {
  std::istringstream in(read_file(root() / "syn" / "synthetic.csv"));
  std::string text, line;
  while (std::getline(in, line)) {
    if (line.rfind("case0,", 0) == 0) {
      std::vector<std::string> fields;
      std::stringstream ss(line);
      for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
      fields[9].clear();  // diagnosis code
      line.clear();
      for (std::size_t i = 0; i < fields.size(); ++i) line += (i ? "," : "") + fields[i];
    }
    text += line + "\n";
  }
  const auto csv = root() / "unlabeled.csv";
  write_file_atomic(csv, text);
  ASSERT_EQ(Run("--out " + Q(root() / "ws_unlabeled") + " ingest --csv " + Q(csv) + " --window 8"), 0);
  EXPECT_EQ(Json(root() / "ws_unlabeled" / "cleaning.json")["imputed_labels"], 1);
}

TEST_F(Cli, SameConfigGivesIdenticalBytes) {
  const std::string args = " train --data " + Q(root() / "ws") + " --model forest --trees 10 --seed 4";
  ASSERT_EQ(Run("--out " + Q(root() / "det_a") + args), 0);
  ASSERT_EQ(Run(args.substr(1) + " --threads 3 --out " + Q(root() / "det_b")), 0);  // globals after the subcommand
  const auto a = Files(root() / "det_a"), b = Files(root() / "det_b");
  EXPECT_EQ(a.size(), 5u);
  EXPECT_EQ(a, b);
}

TEST_F(Cli, FlagsOverrideConfigFile) {
  const auto cfg = root() / "run.cfg";
  write_file_atomic(cfg, "model = forest\ntrees = 5\ndata = " + (root() / "ws").string() + "\n");
  ASSERT_EQ(Run("--config " + Q(cfg) + " --out " + Q(root() / "cfg_a") + " train --trees 7"), 0);
  EXPECT_EQ(Json(root() / "cfg_a" / "forest.json")["params"]["n_estimators"], 7);
  ASSERT_EQ(Run("--config " + Q(cfg) + " --out " + Q(root() / "cfg_b") + " train"), 0);
  EXPECT_EQ(Json(root() / "cfg_b" / "forest.json")["params"]["n_estimators"], 5);
  EXPECT_NE(Json(root() / "cfg_a" / "eval.json")["provenance"]["config_hash"],
            Json(root() / "cfg_b" / "eval.json")["provenance"]["config_hash"]);
}

TEST_F(Cli, ExplainMethodsWriteJsonCsvAndSvg) {
  const std::string base = " explain --data " + Q(root() / "ws") + " --model-dir " + Q(root() / "rf");
  const auto out = root() / "ex";
  ASSERT_EQ(Run("--out " + Q(out) + base + " --method lime --instance case0 --samples 800"), 0);
  ASSERT_EQ(Run("--out " + Q(out) + base + " --method pick --class 106 --budget 2 --samples 500 --candidates 4"), 0);
  ASSERT_EQ(Run("--out " + Q(out) + base + " --method pdp --feature Age --class 106"), 0);
  ASSERT_EQ(Run("--out " + Q(out) + base + " --method ale --feature Age --class 106"), 0);
  ASSERT_EQ(Run("--out " + Q(out) + base + " --method surrogate --surrogate linear"), 0);
  for (const char* name : {"lime_case0.json", "lime_case0.svg", "pick_106.json", "pick_106.svg", "pdp_Age.csv", "pdp_Age.svg",
                           "ale_Age.csv", "surrogate_linear.json"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  EXPECT_LE(Json(out / "pick_106.json")["picked"].size(), 2u);
  EXPECT_EQ(read_file(out / "pdp_Age.csv").rfind("# xlog ", 0), 0u);
}

TEST_F(Cli, FailureLeavesNoPartialOutput) {
  const auto out = root() / "partial";
  const int rc = Run("--out " + Q(out) + " explain --data " + Q(root() / "ws") + " --model-dir " + Q(root() / "rf") +
                     " --method lime --instance case0,no_such_case --samples 300");
  EXPECT_EQ(rc, 2);
  EXPECT_FALSE(fs::exists(out / "lime_case0.json"));
  EXPECT_FALSE(fs::exists(out / "lime_case0.svg"));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_NE(Run(""), 0);
  EXPECT_EQ(Run("--out " + Q(root() / "bad") + " train --model forest"), 2);  // no --data
  EXPECT_EQ(Run("--out " + Q(root() / "bad") + " train --data " + Q(root() / "ws") + " --model forest --trees x"), 2);
  EXPECT_EQ(Run("--out " + Q(root() / "bad") + " explain --data " + Q(root() / "ws") + " --model-dir " + Q(root() / "rf") +
                " --method shap"),
            2);
}

TEST_F(Cli, SequenceModelTrainsAndProjects) {
  const auto nn = root() / "nn";
  ASSERT_EQ(Run("--out " + Q(nn) + " train --data " + Q(root() / "ws") + " --model bilstm --nodes 4 --epochs 5"), 0);
  for (const char* name : {"model.xlg", "model.json", "curve.csv", "curve.svg", "eval.json"}) {
    EXPECT_TRUE(fs::exists(nn / name)) << name;
  }
  const auto pr = root() / "pr";
  ASSERT_EQ(Run("--out " + Q(pr) + " project --data " + Q(root() / "ws") + " --model-dir " + Q(nn) + " --k 3 --epochs 50"), 0);
  const auto clusters = Json(pr / "clusters.json");
  EXPECT_EQ(clusters["activation_width"], 8);  // 2H for a bidirectional model
  EXPECT_TRUE(clusters.contains("note"));
  EXPECT_TRUE(fs::exists(pr / "projection.svg"));
  EXPECT_EQ(Run("--out " + Q(pr) + " project --data " + Q(root() / "ws") + " --model-dir " + Q(nn) + " --bottleneck 3"), 2);
}

}  // namespace
}  // namespace xlog
