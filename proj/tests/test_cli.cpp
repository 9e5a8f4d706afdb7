// Copyright (c) 2026, The selfanno Authors. All rights reserved.
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


#include <cstdlib>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "selfanno/cli.hpp"
#include "selfanno/coco_io.hpp"
#include "test_support.hpp"

using namespace selfanno;
using selfanno::testing::TempDir;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

int binary_exit(const std::string &args) {
  const int status = std::system((std::string(SELFANNO_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// A small synthetic experiment made through the CLI itself.
class CliRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const auto r = cli({"synth", "--out", (dir_->path() / "data").string(), "--preset", "coffee", "--seed", "4",
                        "--training", "3", "--instances", "8", "--annotations", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string dataset() { return (dir_->path() / "data" / "dataset.json").string(); }
  static TempDir *dir_;
};
TempDir *CliRun::dir_ = nullptr;

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({"eval", "--gt", "a.json", "--pred", "b.json", "--bogus"}).code, 2);
  EXPECT_EQ(cli({"eval", "--gt", "a.json"}).code, 2);
  const auto r = cli({"run", "--iterations", "many"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  EXPECT_EQ(binary_exit("--no-such-flag"), 2);
  EXPECT_EQ(binary_exit("run --dataset x.json --unknown"), 2);
}

TEST(Cli, HelpExitsZero) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("synth"), std::string::npos);
  EXPECT_EQ(binary_exit("--help"), 0);
}

TEST(Cli, DomainErrorsExitOne) {
  EXPECT_EQ(cli({"validate", "--dataset", "/nonexistent/d.json"}).code, 1);
  EXPECT_EQ(binary_exit("validate --dataset /nonexistent/d.json"), 1);
  EXPECT_EQ(cli({"report", "--run", "/nonexistent/run"}).code, 1);
  EXPECT_EQ(cli({"synth", "--out", "/tmp/x", "--preset", "tea"}).code, 1);
}

TEST(Cli, FormatMetric) {
  using cli_detail::format_metric;
  EXPECT_EQ(format_metric(1.0), "1.0");
  EXPECT_EQ(format_metric(0.0), "0.0");
  EXPECT_EQ(format_metric(0.835), "0.835");
  EXPECT_EQ(format_metric(0.83498), "0.835");
  EXPECT_EQ(format_metric(0.5), "0.5");
}

TEST(Cli, Lists) {
  EXPECT_EQ(cli_detail::parse_double_list("0.25, 0.5,0.75"), (std::vector<double>{0.25, 0.5, 0.75}));
  EXPECT_EQ(cli_detail::parse_int_list("25,50"), (std::vector<int>{25, 50}));
  EXPECT_THROW(cli_detail::parse_int_list("1,x"), ConfigError);
}

TEST_F(CliRun, EvalOnIdenticalFiles) {
  const auto truth = (dir_->path() / "data" / "full_truth.json").string();
  auto r = cli({"eval", "--gt", truth, "--pred", truth});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("ap75=1.0 ar75=1.0 ", 0), 0u) << r.out;
  // testing partition only when the file has one
  r = cli({"eval", "--gt", dataset(), "--pred", dataset()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ap75=1.0 ar75=1.0"), std::string::npos);
}

TEST_F(CliRun, EvalAcceptsResultLists) {
  const auto gt = load_coco(dataset());
  nlohmann::json list = nlohmann::json::array();
  for (const auto &a : gt.annotations)
    if (gt.in_partition(a.image_id, Partition::Testing))
      list.push_back({{"image_id", a.image_id}, {"category_id", a.category_id}, {"score", 0.9},
                      {"segmentation", coco_detail::rle_to_json(a.mask)}});
  const auto path = dir_->path() / "results.json";
  loop_detail::write_text(path, list.dump());
  const auto r = cli({"eval", "--gt", dataset(), "--pred", path.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ap75=1.0 ar75=1.0"), std::string::npos);
}

TEST_F(CliRun, ValidateSummarisesPartitions) {
  const auto r = cli({"validate", "--dataset", dataset()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("2 bootstrapping, 5 training, 3 testing"), std::string::npos) << r.out;
}

TEST_F(CliRun, RunRestoreReport) {
  const auto run_dir = (dir_->path() / "run").string();
  const auto cfg = dir_->path() / "run.cfg";
  loop_detail::write_text(cfg, "dataset = \"" + dataset() + "\"\nthreshold = 0.5\nepochs = 3\n");
  const auto r = cli({"run", "--config", cfg.string(), "--out", run_dir, "--iterations", "2", "--epochs", "1",
                      "--set", "steps_per_epoch=6", "--seed", "11"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("iteration,ap75,ar75,n_detected,n_gt,promoted,wall_ms\n0,", 0), 0u);
  EXPECT_NE(r.out.find("best iteration: "), std::string::npos);
  const auto saved = parse_config(loop_detail::read_text(std::filesystem::path(run_dir) / "config.txt"));
  EXPECT_EQ(saved.threshold, 0.5);         // from the file
  EXPECT_EQ(saved.epochs_per_iteration, 1);  // flag beats file
  EXPECT_EQ(saved.steps_per_epoch, 6);
  EXPECT_EQ(saved.n_iterations, 2);

  // same seed, same output
  const auto again = cli({"run", "--config", cfg.string(), "--out", (dir_->path() / "run2").string(), "--iterations",
                          "2", "--epochs", "1", "--set", "steps_per_epoch=6", "--seed", "11"});
  EXPECT_EQ(again.out, r.out);

  const auto restored = cli({"restore", "--run", run_dir, "-k", "1", "--continue"});
  ASSERT_EQ(restored.code, 0) << restored.err;
  EXPECT_NE(restored.out.find("restored iteration 1"), std::string::npos);
  EXPECT_EQ(restored.out.substr(restored.out.find("iteration,")), r.out.substr(0, r.out.find("best iteration")));
  EXPECT_EQ(cli({"restore", "--run", run_dir, "-k", "9"}).code, 1);

  ::setenv(kRunDirEnv, run_dir.c_str(), 1);
  const auto rep = cli({"report"});
  ::unsetenv(kRunDirEnv);
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(run_dir) / "report.svg"));
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(run_dir) / "summary.txt"));
}

TEST_F(CliRun, BadOverrides) {
  EXPECT_EQ(cli({"run", "--dataset", dataset(), "--out", "/tmp/unused", "--set", "bogus=1"}).code, 2);
  EXPECT_EQ(cli({"run", "--dataset", dataset(), "--out", "/tmp/unused", "--set", "noequals"}).code, 2);
  EXPECT_EQ(cli({"run", "--dataset", dataset(), "--out", "/tmp/unused", "--threshold", "-1"}).code, 1);
  ::unsetenv(kRunDirEnv);
  EXPECT_EQ(cli({"run", "--dataset", dataset()}).code, 2);  // no output directory anywhere
}

TEST_F(CliRun, GridAndLoio) {
  const auto g = cli({"grid", "--dataset", dataset(), "--out", (dir_->path() / "grid").string(), "--thresholds",
                      "0.25,0.75", "--epochs-grid", "1", "--iterations", "1", "--set", "steps_per_epoch=4"});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_EQ(std::count(g.out.begin(), g.out.end(), '\n'), 3);

  const auto truth = (dir_->path() / "data" / "full_truth.json").string();
  auto full = load_coco(truth);
  // keep two annotated test scenes so the run stays short
  const auto tests = load_coco(dataset()).images_in(Partition::Testing);
  ASSERT_GE(tests.size(), 2u);
  AnnotatedDataset small;
  small.categories = full.categories;
  for (std::size_t i = 0; i < 2; ++i) {
    small.images.push_back(tests[i]);
    for (const auto &a : full.annotations_on(tests[i].id)) small.annotations.push_back(a);
    small.partition_of[tests[i].id] = membership_of({Partition::Training});
  }
  const auto small_path = dir_->path() / "data" / "loio.json";
  save_coco(small, small_path);
  const auto l = cli({"loio", "--dataset", small_path.string(), "--out", (dir_->path() / "loio").string(),
                      "--iterations", "1", "--epochs", "1", "--set", "steps_per_epoch=4"});
  ASSERT_EQ(l.code, 0) << l.err;
  EXPECT_EQ(std::count(l.out.begin(), l.out.end(), '\n'), 3);
}
