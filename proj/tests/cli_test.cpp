#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args, const std::string& env_prefix = "") {
  const std::string cmd = env_prefix + " \"" PDPPO_CLI_PATH "\" " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return o;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) o.out += buf;
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pdppo_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

long csv_rows(const fs::path& p) {
  std::ifstream in(p);
  long n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n - 1;
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("train"), std::string::npos);
}

TEST(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(run("").code, 2); }

TEST(Cli, TrainWritesCsvAndCheckpoint) {
  const auto dir = scratch("train");
  const auto r = run("train --agent pdppo --env frozenlake --steps 1000 --seed 1 --out " +
                     dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "pdppo" / "run_0.csv"));
  EXPECT_TRUE(fs::exists(dir / "pdppo" / "run_0.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "config.json"));
}

TEST(Cli, UnknownAgentIsUsageError) {
  const auto dir = scratch("unknown_agent");
  const auto r = run("train --agent sac --env frozenlake --steps 1000 --out " + dir.string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_FALSE(fs::exists(dir / "sac"));
}

TEST(Cli, BadValueIsUsageError) {
  EXPECT_EQ(run("train --steps lots").code, 2);
  EXPECT_EQ(run("train --env chess --steps 1000").code, 2);
}

TEST(Cli, SameFlagsSameCsv) {
  const auto a = scratch("same_a");
  const auto b = scratch("same_b");
  const std::string flags = "train --agent ppo --env frozenlake --steps 1500 --seed 9 --out ";
  ASSERT_EQ(run(flags + a.string()).code, 0);
  ASSERT_EQ(run(flags + b.string()).code, 0);
  const std::string csv = slurp(a / "ppo" / "run_0.csv");
  EXPECT_FALSE(csv.empty());
  EXPECT_EQ(csv, slurp(b / "ppo" / "run_0.csv"));
}

TEST(Cli, BenchWritesRunsAndReport) {
  const auto dir = scratch("bench");
  const auto r = run("bench --env frozenlake --methods ppo,pdppo --runs 2 --steps 800 --out " +
                     dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* m : {"ppo", "pdppo"}) {
    for (int i = 0; i < 2; ++i) {
      EXPECT_TRUE(fs::exists(dir / m / ("run_" + std::to_string(i) + ".csv")));
    }
  }
  const auto report = nlohmann::json::parse(slurp(dir / "report.json"));
  bool found = false;
  for (const auto& c : report["comparisons"]) {
    if (c["a"] == "ppo" && c["b"] == "pdppo") found = true;
  }
  EXPECT_TRUE(found) << report.dump();
}

TEST(Cli, EnvCheckFrozenLakePasses) {
  const auto r = run("env-check --env frozenlake --trials 1000");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, EnvCheckLotSizingReportsCostDelta) {
  const auto r = run("env-check --env lotsizing --trials 1000");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("max |delta|"), std::string::npos);
}

TEST(Cli, EnvCheckUnknownEnv) { EXPECT_EQ(run("env-check --env chess").code, 2); }

TEST(Cli, FlagBeatsFileBeatsDefault) {
  const auto dir = scratch("precedence");
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"env": {"name": "frozenlake", "n": 4, "m": 4}, "total_steps": 640,
               "agent_config": {"window": 64}})";
  }
  // The file sets the step budget; the flag overrides the window.
  auto r = run("train --agent ppo --config " + (dir / "cfg.json").string() +
               " --window 32 --out " + (dir / "a").string());
  ASSERT_EQ(r.code, 0) << r.out;
  auto snap = nlohmann::json::parse(slurp(dir / "a" / "config.json"));
  EXPECT_EQ(snap["total_steps"], 640);
  EXPECT_EQ(snap["agent_config"]["window"], 32);
  EXPECT_EQ(snap["env"]["n"], 4);
  EXPECT_EQ(csv_rows(dir / "a" / "ppo" / "run_0.csv"), 20);

  // Keys absent from both come from the built-in defaults.
  EXPECT_EQ(snap["agent_config"]["epochs"], 50);
  EXPECT_DOUBLE_EQ(snap["env"]["p_slip"].get<double>(), 0.5);
}

TEST(Cli, EnvironmentVariableOverridesFileButNotFlag) {
  const auto dir = scratch("envvar");
  {
    std::ofstream cfg(dir / "cfg.json");
    cfg << R"({"env": {"name": "frozenlake", "n": 4, "m": 4}, "total_steps": 640,
               "agent_config": {"window": 32, "epochs": 2}})";
  }
  auto r = run("train --agent ppo --config " + (dir / "cfg.json").string() + " --out " +
                   (dir / "a").string(),
               "PDPPO_STEPS=320");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "a" / "config.json"))["total_steps"], 320);

  r = run("train --agent ppo --steps 480 --config " + (dir / "cfg.json").string() + " --out " +
              (dir / "b").string(),
          "PDPPO_STEPS=320");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "b" / "config.json"))["total_steps"], 480);
}

TEST(Cli, EvalLoadsCheckpoint) {
  const auto dir = scratch("eval");
  ASSERT_EQ(run("train --agent pdppo --env bandit --steps 3200 --out " + dir.string()).code, 0);
  const auto r = run("eval --env bandit --episodes 20 --checkpoint " +
                     (dir / "pdppo" / "run_0.ckpt").string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("mean episode reward"), std::string::npos);
}

TEST(Cli, EvalRejectsMismatchedEnvironment) {
  const auto dir = scratch("eval_mismatch");
  ASSERT_EQ(run("train --agent ppo --env bandit --steps 640 --out " + dir.string()).code, 0);
  const auto r = run("eval --env frozenlake --checkpoint " + (dir / "ppo" / "run_0.ckpt").string());
  EXPECT_EQ(r.code, 2) << r.out;
}

TEST(Cli, EvalMissingCheckpoint) {
  EXPECT_EQ(run("eval --checkpoint /nonexistent/run_0.ckpt").code, 2);
}

TEST(Cli, ShippedConfigsResolveAndTrain) {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(PDPPO_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    const auto dir = scratch("config_" + entry.path().stem().string());
    const auto r = run("train --agent pdppo --config " + entry.path().string() +
                       " --steps 400 --window 200 --epochs 1 --runs 1 --out " + dir.string());
    EXPECT_EQ(r.code, 0) << entry.path() << "\n" << r.out;
    const auto snap = nlohmann::json::parse(slurp(dir / "config.json"));
    const auto file = nlohmann::json::parse(slurp(entry.path()));
    EXPECT_EQ(snap["env"]["name"], file["env"]["name"]);
  }
  EXPECT_GE(seen, 4);
}
