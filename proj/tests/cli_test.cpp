#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "crowdnav/serialization.hpp"

using namespace crowdnav;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("crowdnav_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI with stdout/stderr captured; returns the exit status.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + CROWDNAV_CLI + " " + args + " >" + (dir_ / "stdout").string() +
                            " 2>" + (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string out() { return read_text(dir_ / "stdout"); }
  std::string err() { return read_text(dir_ / "stderr"); }
  std::string path(const std::string& name) { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string two_vehicle_csv() {
  std::ostringstream s;
  s << "frame,agent_id,agent_type,x,y\n";
  for (int f = 0; f <= 30; ++f) {
    s << f << ",1,vehicle," << 0.8 * f << ",0\n";
    if (f >= 5) s << f << ",2,vehicle,0," << 0.8 * (f - 5) << "\n";
    s << f << ",10,pedestrian," << 12 << "," << (3.0 - 0.1 * f) << "\n";
  }
  return s.str();
}

}  // namespace

TEST_F(Cli, ExtractWritesScenariosAndManifest) {
  write_text(path("table.csv"), two_vehicle_csv());
  ASSERT_EQ(run("extract " + path("table.csv") + " --out " + path("a") + " --seed 3"), 0) << err();
  EXPECT_TRUE(fs::exists(path("a/scenarios/veh_1.json")));
  EXPECT_TRUE(fs::exists(path("a/scenarios/veh_2.json")));
  const auto manifest = json::parse(read_text(path("a/split.json")));
  std::size_t total = 0;
  for (const auto& [name, ids] : manifest["splits"].items()) total += ids.size();
  EXPECT_EQ(total, 2u);
  ASSERT_EQ(run("extract " + path("table.csv") + " --out " + path("b") + " --seed 3"), 0);
  EXPECT_EQ(read_text(path("a/split.json")), read_text(path("b/split.json")));
}

TEST_F(Cli, ExtractMissingInput) {
  EXPECT_NE(run("extract " + path("nope.csv") + " --out " + path("a")), 0);
  EXPECT_NE(err().find("nope.csv"), std::string::npos);
}

TEST_F(Cli, RunMpcWithGroundTruth) {
  ASSERT_EQ(run("synth --template crossing --count 5 --peds 2 --out " + path("sc")), 0) << err();
  ASSERT_EQ(run("run --scenarios " + path("sc") + " --planner mpc_md --predictor gt --out " + path("r")), 0)
      << err();
  const auto report = read_text(path("r/report.csv"));
  EXPECT_EQ(report.rfind("model,success,collision,timeout,", 0), 0u);
  for (const char* f : {"config.json", "manifest.json", "metrics.csv", "report.md"}) {
    EXPECT_TRUE(fs::exists(path(std::string("r/") + f))) << f;
  }
  EXPECT_EQ(std::distance(fs::directory_iterator(path("r/episodes")), fs::directory_iterator()), 5);
  const auto traj = read_text(path("r/trajectories/crossing_n2_s0.csv"));
  EXPECT_EQ(traj.rfind("step,time,agent,id,k,x,y,sxx,sxy,syy\n", 0), 0u);
  EXPECT_NE(traj.find(",ped,1,6,"), std::string::npos);
}

TEST_F(Cli, ScriptedStraightConflictsOnCrossing) {
  ASSERT_EQ(run("synth --template crossing --count 3 --peds 1 --out " + path("sc")), 0);
  ASSERT_EQ(run("run --scenarios " + path("sc") + " --planner scripted:straight --out " + path("r")), 0);
  std::istringstream metrics(read_text(path("r/metrics.csv")));
  std::string line;
  std::getline(metrics, line);
  int conflicts = 0;
  while (std::getline(metrics, line)) {
    if (line.find(",collision,") != std::string::npos) ++conflicts;
  }
  EXPECT_GE(conflicts, 1);
}

TEST_F(Cli, ExternalPlannerDown) {
  ASSERT_EQ(run("synth --count 1 --out " + path("sc")), 0);
  EXPECT_NE(run("run --scenarios " + path("sc") + " --planner external:tcp:127.0.0.1:1 --out " + path("r")), 0);
  EXPECT_NE(err().find("cannot start planner"), std::string::npos);
  EXPECT_NE(err().find("cannot connect"), std::string::npos);
}

TEST_F(Cli, ConfigFromEnvironmentAndOverrides) {
  ASSERT_EQ(run("synth --count 1 --out " + path("sc")), 0);
  write_text(path("cfg.json"), R"({"r_g": 100, "mpc": {"q_p": 4}})");
  ASSERT_EQ(run("run --scenarios " + path("sc") + " --planner scripted:stop --set mpc.q_p=7 --out " + path("r"),
                "NAV_CONFIG=" + path("cfg.json")),
            0)
      << err();
  const auto cfg = json::parse(read_text(path("r/config.json")));
  EXPECT_EQ(cfg["r_g"], 100.0);
  EXPECT_EQ(cfg["mpc"]["q_p"], 7.0);
  write_text(path("bad.json"), R"({"r_goal": 1})");
  EXPECT_NE(run("run --scenarios " + path("sc") + " --config " + path("bad.json") + " --out " + path("r2")), 0);
  EXPECT_NE(err().find("r_goal"), std::string::npos);
}

TEST_F(Cli, ServeOverStdio) {
  ASSERT_EQ(run("synth --template static_crowd --peds 0 --count 1 --out " + path("sc")), 0);
  std::ostringstream script;
  script << R"({"type":"hello"})" << "\n"
         << R"({"type":"list_scenarios","split":"all"})" << "\n"
         << R"({"type":"reset","scenario_id":"static_crowd_n0_s0"})" << "\n";
  for (int i = 0; i < 20; ++i) script << R"({"type":"step","v":4.167,"dtheta":0})" << "\n";
  write_text(path("script.txt"), script.str());
  ASSERT_EQ(run("serve --stdio --scenarios " + path("sc") + " --out " + path("srv") + " < " + path("script.txt")), 0)
      << err();
  std::istringstream replies(out());
  std::vector<json> r;
  std::string line;
  while (std::getline(replies, line)) r.push_back(json::parse(line));
  ASSERT_EQ(r.size(), 23u);
  EXPECT_EQ(r[0]["config"]["gamma"], 0.99);
  EXPECT_EQ(r[1]["ids"].size(), 1u);
  bool terminal = false;
  std::size_t i = 3;
  for (; i < r.size() && !terminal; ++i) terminal = r[i]["type"] == "step_result" && r[i]["done"].get<bool>();
  ASSERT_TRUE(terminal);
  EXPECT_EQ(r[i - 1]["terminal_kind"], "goal");
  EXPECT_EQ(r[i - 1]["reward"], 10.0);
  EXPECT_EQ(r[i]["type"], "error");
  EXPECT_EQ(r[i]["code"], "episode_done");
  EXPECT_TRUE(fs::exists(path("srv/sessions/session0_0_static_crowd_n0_s0.json")));
}

TEST_F(Cli, ScorePredictor) {
  ASSERT_EQ(run("synth --template crossing --peds 3 --count 2 --out " + path("sc")), 0);
  ASSERT_EQ(run("score-predictor --scenarios " + path("sc") + " --predictor gt --out " + path("gt")), 0) << err();
  const auto gt = read_text(path("gt/calibration.csv"));
  EXPECT_NE(gt.find("gt,0.000,0.000,"), std::string::npos);
  ASSERT_EQ(run("score-predictor --scenarios " + path("sc") + " --predictor cv"), 0);
  EXPECT_NE(out().find("| cv |"), std::string::npos);
}

TEST_F(Cli, Sweep) {
  ASSERT_EQ(run("synth --template crossing --peds 1 --count 2 --out " + path("sc")), 0);
  ASSERT_EQ(run("sweep --scenarios " + path("sc") + " --planner mpc_ed_hard --param r_g --values 1 10 100 --out " +
                path("sw")),
            0)
      << err();
  const auto csv = read_text(path("sw/sweep.csv"));
  EXPECT_NE(csv.find("r_g=1,"), std::string::npos);
  EXPECT_NE(csv.find("r_g=100,"), std::string::npos);
  EXPECT_NE(run("sweep --scenarios " + path("sc") + " --param bogus --values 1 --out " + path("sw2")), 0);
}

TEST_F(Cli, UnknownSubcommand) { EXPECT_NE(run("fly"), 0); }
