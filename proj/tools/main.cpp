// pdppo: train, evaluate and benchmark PPO / PDPPO agents.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
// Settings resolve as: command-line flag > PDPPO_* environment variable >
// --config file > built-in defaults for the environment.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pdppo/env/checks.hpp"
#include "pdppo/pdppo.hpp"

namespace {

using nlohmann::json;
using namespace pdppo;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

/// Flags that map onto config keys. Unset options leave the file/defaults alone.
struct Overrides {
  std::string config_path;
  std::optional<std::string> agent;
  std::optional<std::string> env;
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
  std::optional<std::string> out;
  std::optional<int> runs;
  std::optional<int> parallel;
  std::optional<int> window;
  std::optional<int> epochs;
  std::vector<std::string> methods;

  json as_layer() const {
    json j = json::object();
    if (agent) j["agent"] = *agent;
    if (env) j["env"]["name"] = *env;
    if (seed) j["base_seed"] = *seed;
    if (steps) j["total_steps"] = *steps;
    if (out) j["output_dir"] = *out;
    if (runs) j["n_runs"] = *runs;
    if (parallel) j["parallel_runs"] = *parallel;
    if (window) j["agent_config"]["window"] = *window;
    if (epochs) j["agent_config"]["epochs"] = *epochs;
    if (!methods.empty()) j["methods"] = methods;
    return j;
  }
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config")
      ->envname("PDPPO_CONFIG");
  cmd->add_option("--env", o.env, "frozenlake | lotsizing | bandit")->envname("PDPPO_ENV");
  cmd->add_option("--seed", o.seed, "base seed (run i uses seed + i)")->envname("PDPPO_SEED");
  cmd->add_option("--steps", o.steps, "environment steps per run")->envname("PDPPO_STEPS");
  cmd->add_option("--out", o.out, "output directory")->envname("PDPPO_OUT");
  cmd->add_option("--runs", o.runs, "independent runs per method")->envname("PDPPO_RUNS");
  cmd->add_option("--window", o.window, "steps between policy updates")
      ->envname("PDPPO_WINDOW");
  cmd->add_option("--epochs", o.epochs, "update epochs per window")->envname("PDPPO_EPOCHS");
}

harness::ExperimentConfig resolve(const Overrides& o) {
  std::vector<json> layers;
  if (!o.config_path.empty()) layers.push_back(harness::load_json_file(o.config_path));
  layers.push_back(o.as_layer());
  try {
    return harness::resolve_layers(layers);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
}

void print_table(const harness::ComparisonReport& rep) {
  std::printf("%-9s %4s %24s %28s\n", "method", "n", "max reward (mean +- sd)",
              "cumulative reward (mean +- sd)");
  for (const auto& [name, agg] : rep.methods) {
    std::printf("%-9s %4zu %12.4f +- %-9.4f %14.4f +- %-11.4f\n", name.c_str(),
                agg.max_reward.n, agg.max_reward.mean, agg.max_reward.sd,
                agg.cumulative_reward.mean, agg.cumulative_reward.sd);
  }
  for (const auto& c : rep.comparisons) {
    if (c.test) {
      std::printf("%s vs %s [%s]: t = %.4f, p = %.4g%s\n", c.a.c_str(), c.b.c_str(),
                  c.metric.c_str(), c.test->t, c.test->p,
                  c.significant_01() ? " **" : c.significant_05() ? " *" : "");
    } else {
      std::printf("%s vs %s [%s]: undefined (%s)\n", c.a.c_str(), c.b.c_str(),
                  c.metric.c_str(), c.note.c_str());
    }
  }
}

int cmd_train(const Overrides& o) {
  harness::ExperimentConfig cfg = resolve(o);
  const fs::path dir(cfg.output_dir);
  const auto kind = cfg.agent;
  std::vector<harness::RunSummary> runs;
  // Checkpoints need the trained agents, so runs go through run_single here.
  for (int i = 0; i < cfg.n_runs; ++i) {
    harness::RunResult r = harness::run_single(cfg, kind, i);
    harness::write_text(harness::run_csv_path(dir, kind, i), harness::run_csv(r.summary.log));
    const fs::path ckpt =
        dir / std::string(agents::to_string(kind)) / ("run_" + std::to_string(i) + ".ckpt");
    harness::save_checkpoint(ckpt.string(), *r.agent);
    std::printf("%s run %d (seed %llu): max window reward %.4f, cumulative %.4f, %.1fs\n",
                std::string(agents::to_string(kind)).c_str(), i,
                static_cast<unsigned long long>(r.summary.seed), r.summary.max_window_reward,
                r.summary.total_cumulative_reward, r.summary.wall_time);
    runs.push_back(std::move(r.summary));
  }
  harness::write_text(dir / "config.json", harness::to_json(cfg).dump(2) + "\n");
  if (runs.size() > 1) {
    harness::write_text(dir / std::string(agents::to_string(kind)) / "aggregate.csv",
                        harness::aggregate_csv(harness::aggregate_curve(runs)));
  }
  return kOk;
}

int cmd_bench(const Overrides& o) {
  harness::ExperimentConfig cfg = resolve(o);
  std::vector<std::pair<agents::AgentKind, std::vector<harness::RunSummary>>> by_method;
  for (auto kind : cfg.methods) {
    std::printf("running %s x %d...\n", std::string(agents::to_string(kind)).c_str(), cfg.n_runs);
    std::fflush(stdout);
    by_method.emplace_back(kind, harness::run_experiment(cfg, kind, false));
  }
  const auto report = harness::compare(by_method);
  harness::emit_outputs(by_method, report, cfg, cfg.output_dir);
  print_table(report);
  std::printf("report: %s\n", (fs::path(cfg.output_dir) / "report.json").string().c_str());
  return kOk;
}

int cmd_eval(const Overrides& o, const std::string& checkpoint, int episodes) {
  harness::ExperimentConfig cfg = resolve(o);
  if (episodes < 1) throw ConfigError("--episodes must be >= 1");
  const harness::Checkpoint cp = harness::load_checkpoint(checkpoint);
  const nn::MlpNet& actor = cp.nets.at("actor");
  const auto& sizes = actor.layer_sizes();
  cfg.agent_cfg.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
  cfg.agent_cfg.activation = actor.activation();

  auto environment = harness::make_environment(cfg.env, cfg.run_seed(0));
  if (environment->obs_dim() != sizes.front() ||
      environment->action_spec().arities != actor.softmax_groups()) {
    throw ConfigError("checkpoint does not match the " + cfg.env.name + " environment");
  }
  Rng init(0);
  agents::Agent agent(cp.kind, environment->obs_dim(), environment->action_spec(),
                      cfg.agent_cfg, init);
  harness::restore(agent, cp);
  Rng rng = make_rng(cfg.run_seed(0), SeedStream::evaluation);
  const double mean = agents::evaluate_greedy(agent, *environment, episodes, rng);
  std::printf("%s greedy policy on %s: mean episode reward %.6f over %d episodes\n",
              std::string(agents::to_string(cp.kind)).c_str(), cfg.env.name.c_str(), mean,
              episodes);
  return kOk;
}

int cmd_env_check(const std::string& name, int trials, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("--trials must be >= 1");
  std::vector<env::CheckResult> results;
  if (name == "frozenlake") {
    results = env::check_frozen_lake(trials, seed);
  } else if (name == "lotsizing") {
    results = env::check_lot_sizing(trials, seed);
  } else {
    throw ConfigError("unknown env '" + name + "' (expected frozenlake or lotsizing)");
  }
  bool all = true;
  for (const auto& r : results) {
    std::printf("[%s] %s%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.empty() ? "" : ": ", r.detail.c_str());
    all = all && r.passed;
  }
  std::printf("%s: %zu checks, %s\n", name.c_str(), results.size(),
              all ? "all passed" : "FAILURES");
  return all ? kOk : kRuntimeFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PPO and post-decision PPO agents for Frozen Lake and lot sizing"};
  app.require_subcommand(1);

  Overrides train_o, bench_o, eval_o;

  auto* train = app.add_subcommand("train", "train one agent kind for --runs runs");
  add_common(train, train_o);
  train->add_option("--agent", train_o.agent, "ppo | pdppo | pdppo1c")->envname("PDPPO_AGENT");

  auto* bench = app.add_subcommand("bench", "train every method and compare them");
  add_common(bench, bench_o);
  bench->add_option("--methods", bench_o.methods, "methods to compare")
      ->envname("PDPPO_METHODS")
      ->delimiter(',');
  bench->add_option("--parallel", bench_o.parallel, "runs executed concurrently")
      ->envname("PDPPO_PARALLEL");

  std::string checkpoint;
  int episodes = 100;
  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  add_common(eval, eval_o);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file written by train")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes");

  std::string check_env;
  int trials = 1000;
  std::uint64_t check_seed = 0;
  auto* check = app.add_subcommand("env-check", "run environment invariant checks");
  check->add_option("--env", check_env, "frozenlake | lotsizing")->required();
  check->add_option("--trials", trials, "random trials");
  check->add_option("--seed", check_seed, "seed")->envname("PDPPO_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*train) return cmd_train(train_o);
    if (*bench) return cmd_bench(bench_o);
    if (*eval) return cmd_eval(eval_o, checkpoint, episodes);
    if (*check) return cmd_env_check(check_env, trials, check_seed);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}
