#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pdppo/env/environment.hpp"
#include "pdppo/error.hpp"
#include "pdppo/random.hpp"

namespace pdppo::env {

/// Stochastic discrete lot-sizing: parallel machines, setup costs and setup
/// production losses, lost sales, holding costs. Rewards are negated costs.
namespace lot {

inline constexpr int kIdle = -1;

struct Params {
  int items = 0;
  int machines = 0;
  std::vector<double> setup_cost;      // f_i
  std::vector<double> holding_cost;    // h_i
  std::vector<double> lost_sale_cost;  // l_i
  std::vector<std::vector<int>> production;  // p[i][j], units per period
  std::vector<std::vector<int>> setup_loss;  // c[i][j], units lost on a setup
  std::vector<std::vector<int>> compat;      // items machine j can produce, ascending
  int i_max = 0;
  int horizon = 400;
  int initial_inventory = 0;
  std::vector<double> demand_mean;  // Poisson mean per item

  bool producible(int machine, int item) const {
    const auto& c = compat[static_cast<std::size_t>(machine)];
    return std::binary_search(c.begin(), c.end(), item);
  }

  void validate() const {
    if (items < 1) throw ConfigError("lot sizing needs at least one item");
    if (machines < 1) throw ConfigError("lot sizing needs at least one machine");
    if (i_max <= 0) throw ConfigError("i_max must be positive");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (initial_inventory < 0 || initial_inventory > i_max) {
      throw ConfigError("initial inventory must lie in [0, i_max]");
    }
    const auto L = static_cast<std::size_t>(items);
    const auto Z = static_cast<std::size_t>(machines);
    if (setup_cost.size() != L || holding_cost.size() != L || lost_sale_cost.size() != L ||
        demand_mean.size() != L || production.size() != L || setup_loss.size() != L ||
        compat.size() != Z) {
      throw ConfigError("lot sizing parameter arrays have inconsistent sizes");
    }
    for (std::size_t i = 0; i < L; ++i) {
      if (setup_cost[i] < 0 || holding_cost[i] < 0 || lost_sale_cost[i] < 0) {
        throw ConfigError("costs must be non-negative");
      }
      if (demand_mean[i] < 0) throw ConfigError("demand means must be non-negative");
      if (production[i].size() != Z || setup_loss[i].size() != Z) {
        throw ConfigError("production matrices must be items x machines");
      }
      for (std::size_t j = 0; j < Z; ++j) {
        if (production[i][j] < 0 || setup_loss[i][j] < 0 ||
            setup_loss[i][j] > production[i][j]) {
          throw ConfigError("need 0 <= c[i][j] <= p[i][j]");
        }
      }
    }
    for (const auto& c : compat) {
      if (c.empty()) throw ConfigError("every machine must produce at least one item");
      if (!std::is_sorted(c.begin(), c.end())) throw ConfigError("compat sets must be sorted");
      for (int i : c) {
        if (i < 0 || i >= items) throw ConfigError("compat item out of range");
      }
    }
  }
};

struct State {
  std::vector<int> inventory;  // I_t
  std::vector<int> config;     // M_t, item index or kIdle
  int t = 0;

  bool operator==(const State&) const = default;
};

inline State initial_state(const Params& p) {
  return {std::vector<int>(static_cast<std::size_t>(p.items), p.initial_inventory),
          std::vector<int>(static_cast<std::size_t>(p.machines), kIdle), 0};
}

/// Component j of the policy action: 0 = idle, k >= 1 = compat[j][k-1].
inline std::vector<int> decode_action(const Action& a, const Params& p) {
  if (a.size() != static_cast<std::size_t>(p.machines)) {
    throw InvalidActionError("lot sizing action needs one entry per machine");
  }
  std::vector<int> assignment(a.size(), kIdle);
  for (std::size_t j = 0; j < a.size(); ++j) {
    const auto& c = p.compat[j];
    if (a[j] < 0 || a[j] > static_cast<int>(c.size())) {
      throw InvalidActionError("action index out of range for machine " + std::to_string(j));
    }
    assignment[j] = a[j] == 0 ? kIdle : c[static_cast<std::size_t>(a[j] - 1)];
  }
  return assignment;
}

inline ActionSpec action_space(const Params& p) {
  if (p.machines < 1) throw ConfigError("lot sizing needs at least one machine");
  std::vector<int> ns;
  ns.reserve(static_cast<std::size_t>(p.machines));
  for (const auto& c : p.compat) ns.push_back(static_cast<int>(c.size()) + 1);
  return ActionSpec::multi_discrete(std::move(ns));
}

struct ProductionResult {
  State post;             // inventory after production (capped), new configuration
  double reward = 0.0;    // -(setup costs)
  std::vector<int> setups;  // per machine: item that triggered a setup, or kIdle
};

/// Deterministic phase: change setups, then produce. RNG-free.
inline ProductionResult apply_production(const State& s, const std::vector<int>& assignment,
                                         const Params& p) {
  if (assignment.size() != static_cast<std::size_t>(p.machines)) {
    throw InvalidActionError("assignment needs one entry per machine");
  }
  if (s.t >= p.horizon) throw PhaseError("episode horizon reached");
  ProductionResult out{s, 0.0, std::vector<int>(assignment.size(), kIdle)};
  std::vector<long> produced(static_cast<std::size_t>(p.items), 0);
  for (std::size_t j = 0; j < assignment.size(); ++j) {
    const int item = assignment[j];
    if (item != kIdle) {
      if (item < 0 || item >= p.items || !p.producible(static_cast<int>(j), item)) {
        throw InvalidActionError("machine " + std::to_string(j) + " cannot produce item " +
                                 std::to_string(item));
      }
      const auto i = static_cast<std::size_t>(item);
      produced[i] += p.production[i][j];
      if (item != s.config[j]) {
        out.setups[j] = item;
        out.reward -= p.setup_cost[i];
        produced[i] -= p.setup_loss[i][j];
      }
    }
    out.post.config[j] = item;
  }
  for (std::size_t i = 0; i < produced.size(); ++i) {
    out.post.inventory[i] = static_cast<int>(
        std::min<long>(p.i_max, static_cast<long>(s.inventory[i]) + produced[i]));
  }
  return out;
}

struct DemandResult {
  State next;
  double reward = 0.0;  // -(holding + lost sales)
  bool done = false;
};

/// Stochastic phase for a realised demand vector.
inline DemandResult realize_demand(const State& post, const Params& p,
                                   const std::vector<int>& demand) {
  if (demand.size() != static_cast<std::size_t>(p.items)) {
    throw ShapeError("demand needs one entry per item");
  }
  DemandResult out{post, 0.0, false};
  for (std::size_t i = 0; i < demand.size(); ++i) {
    const int left = post.inventory[i] - demand[i];
    out.next.inventory[i] = std::max(left, 0);
    out.reward -= p.holding_cost[i] * std::max(left, 0) +
                  p.lost_sale_cost[i] * std::max(-left, 0);
  }
  out.next.t = post.t + 1;
  out.done = out.next.t >= p.horizon;
  return out;
}

/// Poisson(mean) conditioned on not exceeding 4 * mean.
inline std::vector<int> sample_demand(const Params& p, Rng& rng) {
  std::vector<int> d(static_cast<std::size_t>(p.items), 0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double mean = p.demand_mean[i];
    if (mean <= 0.0) continue;
    const int cap = static_cast<int>(std::floor(4.0 * mean));
    std::poisson_distribution<int> dist(mean);
    int x;
    do {
      x = dist(rng);
    } while (x > cap);
    d[i] = x;
  }
  return d;
}

inline DemandResult realize_demand(const State& post, const Params& p, Rng& rng) {
  return realize_demand(post, p, sample_demand(p, rng));
}

inline int observation_size(const Params& p) { return p.items + p.machines * (p.items + 1); }

/// Inventories / i_max, then one-hot configuration per machine (slot 0 = idle).
inline ObsVec encode_observation(const State& s, const Params& p) {
  ObsVec obs = ObsVec::Zero(observation_size(p));
  for (int i = 0; i < p.items; ++i) {
    obs(i) = static_cast<double>(s.inventory[static_cast<std::size_t>(i)]) / p.i_max;
  }
  for (int j = 0; j < p.machines; ++j) {
    const int cfg = s.config[static_cast<std::size_t>(j)];
    obs(p.items + j * (p.items + 1) + (cfg == kIdle ? 0 : cfg + 1)) = 1.0;
  }
  return obs;
}

/// Ranges for randomised instances. Integer ranges are inclusive.
struct InstanceSpec {
  int items = 5;
  int machines = 2;
  int i_max = 20;
  int horizon = 400;
  int initial_inventory = -1;  // -1 means i_max / 2
  std::pair<double, double> setup_cost{5.0, 20.0};
  std::pair<double, double> holding_cost{1.0, 5.0};
  std::pair<double, double> lost_sale_cost{10.0, 40.0};
  std::pair<int, int> production{10, 30};
  double max_setup_loss_fraction = 0.5;  // c[i][j] in [0, fraction * p[i][j]]
  std::pair<double, double> demand_mean{5.0, 15.0};
  double compat_density = 1.0;  // chance a machine can produce a given item

  void validate() const {
    if (items < 1 || machines < 1) throw ConfigError("instance needs items >= 1 and machines >= 1");
    if (i_max <= 0) throw ConfigError("i_max must be positive");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (initial_inventory > i_max) throw ConfigError("initial inventory exceeds i_max");
    auto check = [](auto range, double floor, const char* what) {
      if (range.first < floor || range.first > range.second) {
        throw ConfigError(std::string("invalid range for ") + what);
      }
    };
    check(setup_cost, 0.0, "setup_cost");
    check(holding_cost, 0.0, "holding_cost");
    check(lost_sale_cost, 0.0, "lost_sale_cost");
    check(production, 0.0, "production");
    check(demand_mean, 0.0, "demand_mean");
    if (max_setup_loss_fraction < 0.0 || max_setup_loss_fraction > 1.0) {
      throw ConfigError("max_setup_loss_fraction must be in [0,1]");
    }
    if (!(compat_density > 0.0) || compat_density > 1.0) {
      throw ConfigError("compat_density must be in (0,1]");
    }
  }
};

/// Draws a random instance. Every item is producible by at least one machine
/// and every machine produces at least one item.
inline Params make_instance(const InstanceSpec& spec, Rng& rng) {
  spec.validate();
  Params p;
  p.items = spec.items;
  p.machines = spec.machines;
  p.i_max = spec.i_max;
  p.horizon = spec.horizon;
  p.initial_inventory = spec.initial_inventory < 0 ? spec.i_max / 2 : spec.initial_inventory;
  const auto L = static_cast<std::size_t>(spec.items);
  const auto Z = static_cast<std::size_t>(spec.machines);
  for (std::size_t i = 0; i < L; ++i) {
    p.setup_cost.push_back(uniform(rng, spec.setup_cost.first, spec.setup_cost.second));
    p.holding_cost.push_back(uniform(rng, spec.holding_cost.first, spec.holding_cost.second));
    p.lost_sale_cost.push_back(
        uniform(rng, spec.lost_sale_cost.first, spec.lost_sale_cost.second));
    p.demand_mean.push_back(uniform(rng, spec.demand_mean.first, spec.demand_mean.second));
  }
  p.production.assign(L, std::vector<int>(Z, 0));
  p.setup_loss.assign(L, std::vector<int>(Z, 0));
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < Z; ++j) {
      const int prod = uniform_int(rng, spec.production.first, spec.production.second);
      p.production[i][j] = prod;
      p.setup_loss[i][j] = uniform_int(
          rng, 0, static_cast<int>(std::floor(spec.max_setup_loss_fraction * prod)));
    }
  }

  std::vector<std::vector<bool>> can(Z, std::vector<bool>(L, false));
  std::bernoulli_distribution keep(spec.compat_density);
  for (std::size_t j = 0; j < Z; ++j) {
    for (std::size_t i = 0; i < L; ++i) can[j][i] = keep(rng);
  }
  for (std::size_t i = 0; i < L; ++i) {
    bool covered = false;
    for (std::size_t j = 0; j < Z; ++j) covered = covered || can[j][i];
    if (!covered) can[static_cast<std::size_t>(uniform_int(rng, 0, spec.machines - 1))][i] = true;
  }
  for (std::size_t j = 0; j < Z; ++j) {
    if (std::none_of(can[j].begin(), can[j].end(), [](bool b) { return b; })) {
      can[j][static_cast<std::size_t>(uniform_int(rng, 0, spec.items - 1))] = true;
    }
  }
  p.compat.assign(Z, {});
  for (std::size_t j = 0; j < Z; ++j) {
    for (std::size_t i = 0; i < L; ++i) {
      if (can[j][i]) p.compat[j].push_back(static_cast<int>(i));
    }
  }
  p.validate();
  return p;
}

}  // namespace lot

class LotSizing final : public Environment {
 public:
  explicit LotSizing(lot::Params params) : params_(std::move(params)) {
    params_.validate();
    spec_ = lot::action_space(params_);
  }

  int obs_dim() const override { return lot::observation_size(params_); }
  ActionSpec action_spec() const override { return spec_; }
  std::string name() const override { return "lotsizing"; }

  const lot::Params& params() const { return params_; }
  const lot::State& state() const { return state_; }
  /// Demand realised in the most recent stochastic phase.
  const std::vector<int>& last_demand() const { return last_demand_; }

  /// Overrides the current pre-decision state; test hook.
  void set_state(lot::State s) { state_ = std::move(s); }

 protected:
  ObsVec do_reset(std::uint64_t seed) override {
    rng_.seed(seed);
    state_ = lot::initial_state(params_);
    return lot::encode_observation(state_, params_);
  }

  std::pair<ObsVec, double> do_step_deterministic(const Action& a) override {
    auto res = lot::apply_production(state_, lot::decode_action(a, params_), params_);
    state_ = std::move(res.post);
    return {lot::encode_observation(state_, params_), res.reward};
  }

  StochasticOutcome do_step_stochastic() override {
    last_demand_ = lot::sample_demand(params_, rng_);
    auto res = lot::realize_demand(state_, params_, last_demand_);
    state_ = std::move(res.next);
    return {lot::encode_observation(state_, params_), res.reward, res.done};
  }

 private:
  lot::Params params_;
  ActionSpec spec_;
  lot::State state_;
  std::vector<int> last_demand_;
  Rng rng_;
};

}  // namespace pdppo::env
