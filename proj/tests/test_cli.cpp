#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <nlohmann/json.hpp>

namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("oldroyd_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write("run.ini", R"([grid]
M = 32
n = 10

[initial]
velocity_amplitude = 1.0

[noise]
lambda0 = 0.5
c0 = 0.5
c1 = 0.2
h_scale = 0.1
jump_rate = 5
gamma0 = 0.1

[stepper]
dt = 0.01
T = 0.1
record_noise = true

[seeds]
master = 12
)");
  }

  void TearDown() override { fs::remove_all(dir_); }

  void write(const std::string& name, const std::string& text) {
    std::ofstream os(dir_ / name);
    os << text;
  }

  std::string read(const fs::path& p) const {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  /// Runs the CLI with stdout/stderr captured; returns the exit status.
  int run(const std::string& args) {
    const auto cmd = std::string(OLDROYD_CLI_PATH) + " " + args + " > " + (dir_ / "stdout.txt").string() + " 2> " +
                     (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string config(const std::string& name = "run.ini") const { return "--config " + (dir_ / name).string(); }
  std::string out(const std::string& name) const { return "--out " + (dir_ / name).string(); }
  std::string err() const { return read(dir_ / "stderr.txt"); }

  fs::path dir_;
};

TEST_F(Cli, SimulateWritesOutputs) {
  ASSERT_EQ(run("simulate " + config() + " " + out("a")), 0) << err();
  const auto csv = read(dir_ / "a" / "energy.csv");
  std::istringstream is(csv);
  std::string first, header;
  std::getline(is, first);
  std::getline(is, header);
  EXPECT_EQ(first.rfind("# config_hash=", 0), 0u);
  EXPECT_NE(first.find("master_seed=12"), std::string::npos);
  EXPECT_EQ(header, "t,v_hs2,tau_hs2,gradv_hs2,cum_diss,E_N,sym_defect");
  const auto stop = nlohmann::json::parse(read(dir_ / "a" / "stop.json"));
  EXPECT_EQ(stop.at("schema_version"), 1);
  EXPECT_EQ(stop.at("kind"), "horizon");
  EXPECT_TRUE(fs::exists(dir_ / "a" / "noise_path.bin"));
  EXPECT_EQ(read(dir_ / "a" / "config.ini").rfind("# config_hash=", 0), 0u);
}

TEST_F(Cli, RerunIsByteIdenticalAndReplayMatches) {
  ASSERT_EQ(run("simulate " + config() + " " + out("a")), 0) << err();
  ASSERT_EQ(run("simulate " + config() + " " + out("b")), 0) << err();
  EXPECT_EQ(read(dir_ / "a" / "energy.csv"), read(dir_ / "b" / "energy.csv"));
  ASSERT_EQ(run("simulate " + config() + " " + out("c") + " --replay " + (dir_ / "a" / "noise_path.bin").string()), 0)
      << err();
  EXPECT_EQ(read(dir_ / "a" / "energy.csv"), read(dir_ / "c" / "energy.csv"));
}

TEST_F(Cli, SeedFlagOverridesConfig) {
  ASSERT_EQ(run("simulate " + config() + " " + out("a")), 0);
  ASSERT_EQ(run("simulate " + config() + " " + out("b") + " --seed 13"), 0);
  const auto b = read(dir_ / "b" / "energy.csv");
  EXPECT_NE(b.find("master_seed=13"), std::string::npos);
  EXPECT_NE(read(dir_ / "a" / "energy.csv"), b);
}

TEST_F(Cli, OutOfRangeParameterIsConfigError) {
  write("bad.ini", "[params]\nb = 1.5\n");
  EXPECT_EQ(run("simulate " + config("bad.ini") + " " + out("a")), 2);
  EXPECT_NE(err().find("params.b"), std::string::npos);
  EXPECT_NE(err().find("[-1, 1]"), std::string::npos);
  write("unknown.ini", "[params]\nviscosity = 1\n");
  EXPECT_EQ(run("simulate " + config("unknown.ini") + " " + out("a")), 2);
  EXPECT_EQ(run("simulate " + out("a")), 2);
}

TEST_F(Cli, IoErrorsExitThree) {
  EXPECT_EQ(run("simulate " + config("missing.ini") + " " + out("a")), 3);
  write("blocker", "x");
  EXPECT_EQ(run("simulate " + config() + " --out " + (dir_ / "blocker" / "sub").string()), 3);
}

TEST_F(Cli, EnsembleNeedsThirtyRuns) {
  EXPECT_EQ(run("ensemble " + config() + " " + out("e") + " --runs 10"), 2);
  EXPECT_NE(err().find("30"), std::string::npos);
  ASSERT_EQ(run("ensemble " + config() + " " + out("e") + " --runs 30 --threads 2 --N 5 --deltas 0.02,0.1"), 0)
      << err();
  const auto j = nlohmann::json::parse(read(dir_ / "e" / "ensemble.json"));
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("runs"), 30);
  EXPECT_EQ(j.at("survival").size(), 2u);
  EXPECT_EQ(j.at("provenance").at("master_seed"), 12);
}

TEST_F(Cli, RefineReordersCutoffsWithWarning) {
  write("refine.ini", "[grid]\nM = 32\nn = 8\n[initial]\ndecay = 7\n[stepper]\ndt = 0.01\nT = 0.03\n");
  ASSERT_EQ(run("refine " + config("refine.ini") + " " + out("r") + " --cutoffs 8,4 --paths 2"), 0) << err();
  EXPECT_NE(err().find("warning"), std::string::npos);
  const auto j = nlohmann::json::parse(read(dir_ / "r" / "refine.json"));
  EXPECT_EQ(j.at("cutoffs"), nlohmann::json({4.0, 8.0}));
  EXPECT_EQ(j.at("pairs").at(0).at("sup_v").size(), 2u);
}

TEST_F(Cli, VerifyDefaultTrialsPasses) {
  EXPECT_EQ(run("verify " + out("v")), 0) << err();
  const auto j = nlohmann::json::parse(read(dir_ / "v" / "verify.json"));
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_EQ(j.at("trials"), 100);
  EXPECT_EQ(run("verify --trials 50"), 2);
}

}  // namespace
