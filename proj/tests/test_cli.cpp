#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mvfactor");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = mvfactor::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("mvfactor_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SimulateIsReproducibleForAFixedSeed) {
  const std::vector<std::string> base{"simulate", "--p", "6", "--q", "5", "--r", "2", "--c", "2",
                                      "--n", "40", "--seed", "7", "--output"};
  auto a = base;
  a.push_back(path("a.csv"));
  auto b = base;
  b.push_back(path("b.csv"));
  ASSERT_EQ(cli(a).code, 0);
  ASSERT_EQ(cli(b).code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_FALSE(slurp(path("a.csv")).empty());
}

TEST_F(CliTest, EstimatePrintsTableAndWritesCurves) {
  ASSERT_EQ(cli({"simulate", "--p", "10", "--q", "8", "--r", "2", "--c", "3", "--n", "150",
                 "--a", "0.9", "--noise-scale", "0", "--output", path("y.csv")})
                .code,
            0);
  const auto run = cli({"estimate", "--input", path("y.csv"), "--p", "10", "--q", "8", "--h0", "2",
                        "--K", "3", "--mode", "both", "--output", path("curves")});
  ASSERT_EQ(run.code, 0) << run.err;
  EXPECT_NE(run.out.find("mode      method  r_hat  c_hat"), std::string::npos) << run.out;
  EXPECT_NE(run.out.find("two-step  SR      2      3"), std::string::npos) << run.out;
  EXPECT_NE(run.out.find("one-step  MR      2      3"), std::string::npos) << run.out;
  for (const char* f : {"curves_row_one-step.csv", "curves_column_one-step.csv",
                        "curves_row_two-step.csv", "curves_column_two-step.csv"})
    EXPECT_TRUE(fs::exists(dir_ / "curves" / f)) << f;
  const auto table = mvfactor::io::read_curves_csv(path("curves/curves_column_two-step.csv"));
  EXPECT_EQ(table.t_hat.size(), 8u);
  EXPECT_EQ(table.sr.size(), 4u);
}

TEST_F(CliTest, CurvesSubcommandWritesOnlyTheRequestedMode) {
  ASSERT_EQ(cli({"simulate", "--n", "60", "--output", path("y.csv")}).code, 0);
  const auto run = cli({"curves", "--input", path("y.csv"), "--p", "20", "--q", "20", "--mode",
                        "one-step", "--output", path("c")});
  ASSERT_EQ(run.code, 0) << run.err;
  EXPECT_TRUE(fs::exists(dir_ / "c" / "curves_row_one-step.csv"));
  EXPECT_FALSE(fs::exists(dir_ / "c" / "curves_row_two-step.csv"));
}

TEST_F(CliTest, MonteCarloFromConfigWithFlagOverrides) {
  std::ofstream(path("cell.json")) << R"({"dgp": {"p": 10, "q": 10, "r": 2, "c": 2, "n": [60, 90],
    "seed": 3}, "replications": 50, "methods": ["SR:two-step", "ER:one-step"]})";
  const auto run = cli({"montecarlo", "--config", path("cell.json"), "--reps", "4", "--threads",
                        "2", "--output", path("mc.csv")});
  ASSERT_EQ(run.code, 0) << run.err;
  std::ifstream in(path("mc.csv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 1u + 2 * 4);
  EXPECT_NE(lines[1].find(",4,1,SR,two-step,row,SR,"), std::string::npos) << lines[1];
  EXPECT_NE(run.out.find("reps=4"), std::string::npos);
}

TEST_F(CliTest, MonteCarloIsReproducible) {
  const std::vector<std::string> args{"montecarlo", "--p", "8", "--q", "8", "--n", "50",
                                      "--r", "1", "--c", "1", "--reps", "6", "--seed", "5"};
  auto a = args;
  a.insert(a.end(), {"--threads", "1", "--output", path("a.csv")});
  auto b = args;
  b.insert(b.end(), {"--threads", "3", "--output", path("b.csv")});
  ASSERT_EQ(cli(a).code, 0);
  ASSERT_EQ(cli(b).code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
}

TEST_F(CliTest, CrossValidationWritesReport) {
  ASSERT_EQ(cli({"simulate", "--p", "8", "--q", "6", "--r", "1", "--c", "1", "--n", "60",
                 "--output", path("y.csv")})
                .code,
            0);
  const auto run = cli({"cv", "--input", path("y.csv"), "--p", "8", "--q", "6", "--candidates",
                        "1:1,2:2,8:6", "--folds", "5", "--output", path("cv.csv")});
  ASSERT_EQ(run.code, 0) << run.err;
  const auto text = slurp(path("cv.csv"));
  EXPECT_EQ(text.rfind("r,c,folds,rss\n1,1,5,", 0), 0u) << text;
  EXPECT_NE(text.find("8,6,5,0\n"), std::string::npos) << text;
}

TEST_F(CliTest, UsageErrorsExitNonZeroWithPrefix) {
  auto run = cli({"estimate", "--bogus"});
  EXPECT_EQ(run.code, 2);
  EXPECT_EQ(run.err.rfind("error: usage: ", 0), 0u) << run.err;
  run = cli({});
  EXPECT_EQ(run.code, 2);
  run = cli({"estimate", "--input", path("none.csv"), "--p", "2", "--q", "2"});
  EXPECT_EQ(run.code, 2);
  run = cli({"estimate", "--input", path("none.csv"), "--p", "2", "--q", "2", "--mode", "three"});
  EXPECT_EQ(run.code, 2);
}

TEST_F(CliTest, InvalidConfigIsAUsageError) {
  std::ofstream(path("bad.json")) << R"({"dgp": {"p": 3, "r": 5}})";
  const auto run = cli({"montecarlo", "--config", path("bad.json")});
  EXPECT_EQ(run.code, 2);
  EXPECT_EQ(run.err.rfind("error: config: r:", 0), 0u) << run.err;
  const auto bad_flag = cli({"simulate", "--a", "1.2", "--output", path("y.csv")});
  EXPECT_EQ(bad_flag.code, 2);
  EXPECT_EQ(bad_flag.err.rfind("error: config: a:", 0), 0u) << bad_flag.err;
}

TEST_F(CliTest, RuntimeErrorsUseKindPrefix) {
  std::ofstream(path("bad.csv")) << "1,2,3,4\n1,2,x,4\n";
  const auto run = cli({"estimate", "--input", path("bad.csv"), "--p", "2", "--q", "2"});
  EXPECT_EQ(run.code, 1);
  EXPECT_EQ(run.err.rfind("error: parse: ", 0), 0u) << run.err;
  EXPECT_NE(run.err.find("bad.csv:2"), std::string::npos);
  EXPECT_EQ(std::count(run.err.begin(), run.err.end(), '\n'), 1);

  std::ofstream(path("short.csv")) << "1,2,3,4,5,6,7,8,9\n9,8,7,6,5,4,3,2,1\n";
  const auto short_run = cli({"estimate", "--input", path("short.csv"), "--p", "3", "--q", "3"});
  EXPECT_EQ(short_run.code, 1);
  EXPECT_EQ(short_run.err.rfind("error: insufficient-sample: ", 0), 0u) << short_run.err;
}

TEST_F(CliTest, HelpSucceeds) {
  const auto run = cli({"--help"});
  EXPECT_EQ(run.code, 0);
  EXPECT_NE(run.out.find("montecarlo"), std::string::npos);
}
