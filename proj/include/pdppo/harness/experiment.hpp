#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdppo/agents/agent.hpp"
#include "pdppo/harness/checkpoint.hpp"
#include "pdppo/harness/config.hpp"
#include "pdppo/harness/stats.hpp"
#include "pdppo/random.hpp"

namespace pdppo::harness {

namespace fs = std::filesystem;

struct RunSummary {
  int run_index = 0;
  std::uint64_t seed = 0;
  double max_window_reward = 0.0;
  double total_cumulative_reward = 0.0;
  std::vector<std::pair<long, double>> reward_curve;  // (step, window reward)
  double wall_time = 0.0;                             // seconds
  agents::RunLog log;
};

inline RunSummary summarize(int run_index, std::uint64_t seed, agents::RunLog log,
                            double wall_time) {
  RunSummary s;
  s.run_index = run_index;
  s.seed = seed;
  s.max_window_reward = log.max_window_reward();
  s.total_cumulative_reward = log.total_reward();
  for (const auto& w : log.windows) s.reward_curve.emplace_back(w.step, w.window_reward);
  s.wall_time = wall_time;
  s.log = std::move(log);
  return s;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline constexpr const char* kRunCsvHeader =
    "step,window_reward,cumulative_reward,actor_loss,critic_loss,post_critic_loss,entropy";
inline constexpr const char* kAggregateCsvHeader = "step,mean_reward,ci_low,ci_high,n";

inline std::string run_csv(const agents::RunLog& log) {
  std::ostringstream out;
  out << kRunCsvHeader << '\n';
  for (const auto& w : log.windows) {
    out << w.step << ',' << format_double(w.window_reward) << ','
        << format_double(w.cumulative_reward) << ',' << format_double(w.stats.actor_loss) << ','
        << format_double(w.stats.critic_loss) << ',' << format_double(w.stats.post_critic_loss)
        << ',' << format_double(w.stats.entropy) << '\n';
  }
  return out.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

inline fs::path run_csv_path(const fs::path& dir, agents::AgentKind kind, int run_index) {
  return dir / std::string(agents::to_string(kind)) / ("run_" + std::to_string(run_index) + ".csv");
}

/// Trains one run. The returned agent holds the final networks.
struct RunResult {
  RunSummary summary;
  std::optional<agents::Agent> agent;
};

inline RunResult run_single(const ExperimentConfig& cfg, agents::AgentKind kind, int run_index) {
  const std::uint64_t seed = cfg.run_seed(run_index);
  const auto start = std::chrono::steady_clock::now();
  auto environment = make_environment(cfg.env, seed);
  Rng init_rng = make_rng(seed, SeedStream::network_init);
  agents::Agent agent(kind, environment->obs_dim(), environment->action_spec(), cfg.agent_cfg,
                      init_rng);
  Rng rng = make_rng(seed, SeedStream::agent);
  agents::RunLog log = agents::train(agent, *environment, cfg.total_steps, rng);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {summarize(run_index, seed, std::move(log), secs), std::move(agent)};
}

/// n_runs independent trainings of `kind` on a pool of parallel_runs workers.
/// Each run's CSV and summary are written under output_dir/<kind>/ when
/// `persist` is set. Results are ordered by run index and do not depend on
/// the degree of parallelism.
inline std::vector<RunSummary> run_experiment(const ExperimentConfig& cfg, agents::AgentKind kind,
                                              bool persist = true) {
  cfg.validate();
  std::vector<std::optional<RunSummary>> results(static_cast<std::size_t>(cfg.n_runs));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  int failed_index = -1;
  std::string failed_what;

  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const int i = next.fetch_add(1);
      if (i >= cfg.n_runs) return;
      try {
        RunResult r = run_single(cfg, kind, i);
        if (persist) {
          const fs::path dir = fs::path(cfg.output_dir);
          write_text(run_csv_path(dir, kind, i), run_csv(r.summary.log));
          json summary{{"run_index", i},
                       {"seed", r.summary.seed},
                       {"max_window_reward", r.summary.max_window_reward},
                       {"total_cumulative_reward", r.summary.total_cumulative_reward},
                       {"wall_time", r.summary.wall_time}};
          write_text(dir / std::string(agents::to_string(kind)) /
                         ("run_" + std::to_string(i) + "_summary.json"),
                     summary.dump(2) + "\n");
        }
        results[static_cast<std::size_t>(i)] = std::move(r.summary);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true) || i < failed_index) {
          failed_index = i;
          failed_what = e.what();
        }
        return;
      }
    }
  };

  const int workers = std::min(cfg.parallel_runs, cfg.n_runs);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed) {
    throw std::runtime_error(std::string(agents::to_string(kind)) + " run " +
                             std::to_string(failed_index) + " failed: " + failed_what);
  }
  std::vector<RunSummary> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

struct MetricAggregate {
  MeanSd max_reward;
  MeanSd cumulative_reward;
};

inline MetricAggregate aggregate(const std::vector<RunSummary>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate needs at least one run");
  std::vector<double> mx, cum;
  for (const auto& r : runs) {
    mx.push_back(r.max_window_reward);
    cum.push_back(r.total_cumulative_reward);
  }
  return {mean_sd(mx), mean_sd(cum)};
}

struct CurvePoint {
  long step = 0;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
};

/// Per logging step: mean window reward and mean +- 1.96 SD / sqrt(n).
inline std::vector<CurvePoint> aggregate_curve(const std::vector<RunSummary>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_curve needs at least one run");
  std::size_t len = runs.front().reward_curve.size();
  for (const auto& r : runs) len = std::min(len, r.reward_curve.size());
  std::vector<CurvePoint> out;
  for (std::size_t k = 0; k < len; ++k) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(r.reward_curve[k].second);
    const MeanSd ms = mean_sd(xs);
    const double half = 1.96 * ms.sd / std::sqrt(static_cast<double>(ms.n));
    out.push_back({runs.front().reward_curve[k].first, ms.mean, ms.mean - half, ms.mean + half,
                   ms.n});
  }
  return out;
}

inline std::string aggregate_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream out;
  out << kAggregateCsvHeader << '\n';
  for (const auto& p : curve) {
    out << p.step << ',' << format_double(p.mean) << ',' << format_double(p.ci_low) << ','
        << format_double(p.ci_high) << ',' << p.n << '\n';
  }
  return out.str();
}

struct PairComparison {
  std::string a;
  std::string b;
  std::string metric;  // max_reward | cumulative_reward
  std::optional<WelchResult> test;  // empty when the test is undefined
  std::string note;

  bool significant_05() const { return test && test->p < 0.05; }
  bool significant_01() const { return test && test->p < 0.01; }
};

struct ComparisonReport {
  std::vector<std::pair<std::string, MetricAggregate>> methods;
  std::vector<PairComparison> comparisons;

  const PairComparison* find(const std::string& a, const std::string& b,
                             const std::string& metric) const {
    for (const auto& c : comparisons) {
      if (c.a == a && c.b == b && c.metric == metric) return &c;
    }
    return nullptr;
  }
};

/// Mean/SD per method and a Welch test for every method pair (a listed
/// before b), on both metrics.
inline ComparisonReport compare(
    const std::vector<std::pair<agents::AgentKind, std::vector<RunSummary>>>& by_method) {
  ComparisonReport rep;
  for (const auto& [kind, runs] : by_method) {
    rep.methods.emplace_back(std::string(agents::to_string(kind)), aggregate(runs));
  }
  auto values = [](const std::vector<RunSummary>& runs, bool max_metric) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(max_metric ? r.max_window_reward : r.total_cumulative_reward);
    return v;
  };
  for (std::size_t i = 0; i < by_method.size(); ++i) {
    for (std::size_t j = i + 1; j < by_method.size(); ++j) {
      for (bool max_metric : {true, false}) {
        PairComparison pc;
        pc.a = std::string(agents::to_string(by_method[i].first));
        pc.b = std::string(agents::to_string(by_method[j].first));
        pc.metric = max_metric ? "max_reward" : "cumulative_reward";
        try {
          pc.test = welch_t_test(values(by_method[i].second, max_metric),
                                 values(by_method[j].second, max_metric));
        } catch (const std::exception& e) {
          pc.note = e.what();
        }
        rep.comparisons.push_back(std::move(pc));
      }
    }
  }
  return rep;
}

inline json to_json(const ComparisonReport& rep) {
  json methods = json::array();
  for (const auto& [name, agg] : rep.methods) {
    methods.push_back({{"method", name},
                       {"n", agg.max_reward.n},
                       {"max_reward", {{"mean", agg.max_reward.mean}, {"sd", agg.max_reward.sd}}},
                       {"cumulative_reward",
                        {{"mean", agg.cumulative_reward.mean}, {"sd", agg.cumulative_reward.sd}}}});
  }
  json comps = json::array();
  for (const auto& c : rep.comparisons) {
    json e{{"a", c.a}, {"b", c.b}, {"metric", c.metric}};
    if (c.test) {
      e["t"] = c.test->t;
      e["df"] = c.test->df;
      e["p"] = c.test->p;
      e["p_a_greater"] = c.test->p_greater();
      e["significant_05"] = c.significant_05();
      e["significant_01"] = c.significant_01();
    } else {
      e["t"] = nullptr;
      e["p"] = nullptr;
      e["note"] = c.note;
    }
    comps.push_back(std::move(e));
  }
  return {{"methods", methods}, {"comparisons", comps}};
}

/// Writes per-run curves, per-method aggregate curves, the comparison report
/// and a config snapshot.
inline void emit_outputs(
    const std::vector<std::pair<agents::AgentKind, std::vector<RunSummary>>>& by_method,
    const ComparisonReport& report, const ExperimentConfig& cfg, const fs::path& dir) {
  for (const auto& [kind, runs] : by_method) {
    for (const auto& r : runs) write_text(run_csv_path(dir, kind, r.run_index), run_csv(r.log));
    write_text(dir / std::string(agents::to_string(kind)) / "aggregate.csv",
               aggregate_csv(aggregate_curve(runs)));
  }
  write_text(dir / "report.json", to_json(report).dump(2) + "\n");
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
}

}  // namespace pdppo::harness
