#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "pdppo/env/frozen_lake.hpp"
#include "pdppo/env/lot_sizing.hpp"
#include "pdppo/random.hpp"

namespace pdppo::env {

/// Randomised invariant suites for the environments, shared by the
/// `env-check` command and the tests.

struct CheckResult {
  std::string name;
  bool passed = true;
  std::string detail;
};

namespace detail {

inline CheckResult make_check(std::string name, bool ok, std::string detail = {}) {
  return {std::move(name), ok, std::move(detail)};
}

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

}  // namespace detail

inline std::vector<CheckResult> check_frozen_lake(int trials, std::uint64_t seed,
                                                  lake::Config cfg = {}) {
  Rng rng(derive_seed(seed, SeedStream::evaluation));
  bool rewards_ok = true;
  bool replay_ok = true;
  bool terminal_ok = true;
  bool grid_ok = true;
  bool obs_ok = true;
  for (int trial = 0; trial < trials; ++trial) {
    FrozenLake env(cfg, rng());
    const auto& g = env.grid();
    grid_ok = grid_ok && g.at(0, 0) == lake::Cell::start && g.at(g.n - 1, g.m - 1) == lake::Cell::goal;
    ObsVec obs = env.reset(rng());
    obs_ok = obs_ok && obs.size() == env.obs_dim() && obs.sum() >= 1.0;
    for (int step = 0; step < 400; ++step) {
      const int a = uniform_int(rng, 0, lake::kNumMoves - 1);
      // Replaying the deterministic phase on a copy with a scrambled RNG must agree.
      FrozenLake twin = env;
      twin.reset(rng());
      twin.set_position(env.state().pos);
      auto [post, det] = env.step_deterministic({a});
      auto [post2, det2] = twin.step_deterministic({a});
      replay_ok = replay_ok && post == post2 && det == det2;
      auto st = env.step_stochastic();
      const double total = det + st.reward;
      rewards_ok = rewards_ok && (total == 0.0 || total == 1.0 || total == lake::hole_penalty(g));
      const auto pos = env.state().pos;
      if (g.terminal(pos.row, pos.col) && !st.done) terminal_ok = false;
      obs_ok = obs_ok && st.next_obs.allFinite() && st.next_obs.size() == env.obs_dim();
      if (st.done) break;
    }
  }

  bool clamp_ok = true;
  lake::Grid open{cfg.n, cfg.m, 0.0,
                  std::vector<lake::Cell>(static_cast<std::size_t>(cfg.n * cfg.m), lake::Cell::frozen)};
  for (lake::Position corner : {lake::Position{0, 0}, lake::Position{0, cfg.m - 1},
                                lake::Position{cfg.n - 1, 0}, lake::Position{cfg.n - 1, cfg.m - 1}}) {
    for (int mv = 0; mv < lake::kNumMoves; ++mv) {
      const auto q = lake::shifted(open, corner, mv);
      clamp_ok = clamp_ok && q.row >= 0 && q.row < cfg.n && q.col >= 0 && q.col < cfg.m;
    }
  }

  return {detail::make_check("start/goal never holes", grid_ok),
          detail::make_check("step reward in {0, +1, -1/(n*m)}", rewards_ok),
          detail::make_check("deterministic phase replays bitwise", replay_ok),
          detail::make_check("terminal cell sets done", terminal_ok),
          detail::make_check("corner moves stay on grid", clamp_ok),
          detail::make_check("observations finite with declared length", obs_ok)};
}

/// Straight-line immediate contribution C_t for one period: setup costs,
/// then holding and lost sales on the capped post-production inventory.
inline double lot_sizing_cost_oracle(const lot::Params& p, const std::vector<int>& inventory,
                                     const std::vector<int>& config,
                                     const std::vector<int>& assignment,
                                     const std::vector<int>& demand) {
  double cost = 0.0;
  for (int i = 0; i < p.items; ++i) {
    double produced = 0.0;
    for (int j = 0; j < p.machines; ++j) {
      const bool x = assignment[static_cast<std::size_t>(j)] == i;
      const bool delta = x && config[static_cast<std::size_t>(j)] != i;
      cost += p.setup_cost[static_cast<std::size_t>(i)] * (delta ? 1.0 : 0.0);
      produced += p.production[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * (x ? 1.0 : 0.0) -
                  p.setup_loss[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * (delta ? 1.0 : 0.0);
    }
    const double available = std::min<double>(p.i_max, inventory[static_cast<std::size_t>(i)] + produced);
    const double d = demand[static_cast<std::size_t>(i)];
    cost += p.holding_cost[static_cast<std::size_t>(i)] * std::max(available - d, 0.0);
    cost += p.lost_sale_cost[static_cast<std::size_t>(i)] * std::max(d - available, 0.0);
  }
  return cost;
}

inline std::vector<CheckResult> check_lot_sizing(int trials, std::uint64_t seed,
                                                 lot::InstanceSpec spec = {}) {
  Rng rng(derive_seed(seed, SeedStream::evaluation));
  const lot::Params p = lot::make_instance(spec, rng);
  const ActionSpec aspec = lot::action_space(p);
  bool bounds_ok = true;
  bool setup_ok = true;
  bool replay_ok = true;
  double max_delta = 0.0;

  for (int trial = 0; trial < trials; ++trial) {
    lot::State s;
    for (int i = 0; i < p.items; ++i) s.inventory.push_back(uniform_int(rng, 0, p.i_max));
    for (int j = 0; j < p.machines; ++j) {
      const auto& c = p.compat[static_cast<std::size_t>(j)];
      const int k = uniform_int(rng, 0, static_cast<int>(c.size()));
      s.config.push_back(k == 0 ? lot::kIdle : c[static_cast<std::size_t>(k - 1)]);
    }
    s.t = uniform_int(rng, 0, p.horizon - 1);
    Action a;
    for (int n : aspec.arities) a.push_back(uniform_int(rng, 0, n - 1));
    const auto assignment = lot::decode_action(a, p);
    std::vector<int> demand;
    for (int i = 0; i < p.items; ++i) {
      demand.push_back(uniform_int(rng, 0, 3 * static_cast<int>(p.demand_mean[static_cast<std::size_t>(i)]) + 1));
    }

    const auto prod = lot::apply_production(s, assignment, p);
    const auto again = lot::apply_production(s, assignment, p);
    replay_ok = replay_ok && prod.post == again.post && prod.reward == again.reward;
    const auto dem = lot::realize_demand(prod.post, p, demand);
    for (int v : prod.post.inventory) bounds_ok = bounds_ok && v >= 0 && v <= p.i_max;
    for (int v : dem.next.inventory) bounds_ok = bounds_ok && v >= 0 && v <= p.i_max;
    for (int j = 0; j < p.machines; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const bool changed = assignment[ju] != lot::kIdle && assignment[ju] != s.config[ju];
      setup_ok = setup_ok && (prod.setups[ju] != lot::kIdle) == changed &&
                 (!changed || prod.setups[ju] == assignment[ju]);
    }
    const double oracle = -lot_sizing_cost_oracle(p, s.inventory, s.config, assignment, demand);
    max_delta = std::max(max_delta, std::abs(prod.reward + dem.reward - oracle));
  }

  lot::Params free_costs = p;
  std::fill(free_costs.holding_cost.begin(), free_costs.holding_cost.end(), 0.0);
  std::fill(free_costs.lost_sale_cost.begin(), free_costs.lost_sale_cost.end(), 0.0);
  bool zero_ok = true;
  LotSizing zero_env(free_costs);
  zero_env.reset(rng());
  for (int step = 0; step < std::min(trials, p.horizon); ++step) {
    Action a;
    for (int n : aspec.arities) a.push_back(uniform_int(rng, 0, n - 1));
    zero_env.step_deterministic(a);
    auto st = zero_env.step_stochastic();
    zero_ok = zero_ok && st.reward == 0.0;
    if (st.done) break;
  }

  return {detail::make_check("inventory within [0, i_max]", bounds_ok),
          detail::make_check("step reward matches cost oracle", max_delta < 1e-9,
                             "max |delta| = " + detail::fmt(max_delta)),
          detail::make_check("setup iff configuration changes to an item", setup_ok),
          detail::make_check("production phase replays bitwise", replay_ok),
          detail::make_check("h = l = 0 gives zero stochastic reward", zero_ok)};
}

}  // namespace pdppo::env
