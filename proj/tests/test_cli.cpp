#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "probest_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(PROBEST_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
  static std::string at(const std::string& name) { return (kWork / name).string(); }
};

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("gen --n notanumber"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, BadConfigExitsTwo) {
  std::ofstream(at("bad.json")) << R"x({"data": {"colour": 1}})x";
  EXPECT_EQ(run("--config " + at("bad.json") + " report"), 2);
  std::ofstream(at("broken.json")) << "{";
  EXPECT_EQ(run("--config " + at("broken.json") + " report"), 2);
  EXPECT_EQ(run("--config " + at("missing.json") + " report"), 2);
}

TEST_F(Cli, PipelineSucceeds) {
  const auto out = at("pipe");
  ASSERT_EQ(run("--seed 3 --out " + out + " gen --n 600 --dim 3"), 0);
  ASSERT_TRUE(fs::exists(fs::path(out) / "dataset.csv"));
  const auto data = (fs::path(out) / "dataset.csv").string();
  ASSERT_EQ(run("--seed 3 --out " + out + "/train train --data " + data), 0);
  const auto model = fs::path(out) / "train" / "model.json";
  ASSERT_TRUE(fs::exists(model));
  EXPECT_TRUE(fs::exists(fs::path(out) / "train" / "history.csv"));
  EXPECT_EQ(run("--out " + out + "/eval eval --predictions " + out + "/train/test_predictions.csv"),
            0);
  EXPECT_TRUE(fs::exists(fs::path(out) / "eval" / "metrics.csv"));
  EXPECT_EQ(run("--out " + out + "/recal recal --val " + out + "/train/val_predictions.csv --apply " +
                out + "/train/test_predictions.csv --method platt"),
            0);
  EXPECT_EQ(run("--out " + out + "/cape cape --data " + data + " --model " + model.string()),
            0);
  EXPECT_TRUE(fs::exists(fs::path(out) / "cape" / "cape_history.csv"));
}

TEST_F(Cli, RuntimeFailuresExitOne) {
  EXPECT_EQ(run("--out " + at("x") + " train --data " + at("nope.csv")), 1);
  std::ofstream(at("one_class.csv")) << "prob,outcome\n0.2,1\n0.6,1\n0.7,1\n";
  EXPECT_EQ(run("--out " + at("y") + " recal --val " + at("one_class.csv")), 1);
}
