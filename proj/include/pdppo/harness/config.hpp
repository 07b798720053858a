#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdppo/agents/config.hpp"
#include "pdppo/env/bandit.hpp"
#include "pdppo/env/environment.hpp"
#include "pdppo/env/frozen_lake.hpp"
#include "pdppo/env/lot_sizing.hpp"
#include "pdppo/error.hpp"
#include "pdppo/random.hpp"

namespace pdppo::harness {

using nlohmann::json;

struct EnvSpec {
  std::string name = "frozenlake";  // frozenlake | lotsizing | bandit
  env::lake::Config lake;
  env::lot::InstanceSpec lot;
  /// Lot-sizing instance seed; negative means "derive from the run seed".
  std::int64_t instance_seed = 0;
  std::vector<double> arms{1.0, 0.0};
};

/// Everything needed to reproduce an experiment. Per-run seeds are
/// base_seed + run index.
struct ExperimentConfig {
  agents::AgentKind agent = agents::AgentKind::pdppo;
  std::vector<agents::AgentKind> methods{agents::AgentKind::ppo, agents::AgentKind::pdppo};
  EnvSpec env;
  agents::AgentConfig agent_cfg;
  long total_steps = 200000;
  int n_runs = 1;
  std::uint64_t base_seed = 0;
  std::string output_dir = "runs";
  int parallel_runs = 1;

  std::uint64_t run_seed(int run_index) const {
    return base_seed + static_cast<std::uint64_t>(run_index);
  }

  void validate() const {
    agent_cfg.validate();
    if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
    if (parallel_runs < 1) throw ConfigError("parallel_runs must be >= 1");
    if (total_steps < agent_cfg.window) {
      throw ConfigError("total_steps must be >= the update window");
    }
    if (methods.empty()) throw ConfigError("methods must not be empty");
    if (env.name == "frozenlake") {
      env.lake.validate();
    } else if (env.name == "lotsizing") {
      env.lot.validate();
    } else if (env.name == "bandit") {
      if (env.arms.empty()) throw ConfigError("bandit needs arms");
    } else {
      throw ConfigError("unknown env '" + env.name + "' (expected frozenlake or lotsizing)");
    }
  }
};

/// Built-in defaults for an environment: its hyperparameter table and
/// step budget.
inline ExperimentConfig defaults_for(const std::string& env_name) {
  ExperimentConfig c;
  c.env.name = env_name;
  if (env_name == "frozenlake") {
    c.agent_cfg = agents::AgentConfig::frozen_lake();
    c.total_steps = 200000;
  } else if (env_name == "lotsizing") {
    c.agent_cfg = agents::AgentConfig::lot_sizing();
    c.total_steps = 1000000;
    c.methods = {agents::AgentKind::ppo, agents::AgentKind::pdppo, agents::AgentKind::pdppo1c};
  } else if (env_name == "bandit") {
    c.agent_cfg.window = 32;
    c.agent_cfg.epochs = 10;
    c.agent_cfg.minibatch_size = 8;
    c.total_steps = 32 * 200;
  } else {
    throw ConfigError("unknown env '" + env_name + "' (expected frozenlake or lotsizing)");
  }
  return c;
}

namespace detail {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename T>
void read_range(const json& j, const char* key, std::pair<T, T>& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw ConfigError(std::string("config key '") + key + "' must be [lo, hi]");
  }
  try {
    out = {v[0].get<T>(), v[1].get<T>()};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline const std::vector<std::string>& known_top_level_keys() {
  static const std::vector<std::string> keys{
      "agent", "methods", "env", "agent_config", "total_steps",
      "n_runs", "base_seed", "output_dir", "parallel_runs"};
  return keys;
}

inline void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                           const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace detail

/// Applies a JSON document on top of the defaults of its environment.
/// Unknown keys are rejected.
inline ExperimentConfig resolve_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown(doc, detail::known_top_level_keys(), "config");
  std::string env_name = "frozenlake";
  if (doc.contains("env")) {
    if (!doc["env"].is_object()) throw ConfigError("'env' must be an object");
    detail::read(doc["env"], "name", env_name);
  }
  ExperimentConfig c = defaults_for(env_name);

  if (doc.contains("agent")) {
    c.agent = agents::agent_kind_from_string(doc["agent"].get<std::string>());
  }
  if (doc.contains("methods")) {
    c.methods.clear();
    for (const auto& m : doc["methods"]) {
      c.methods.push_back(agents::agent_kind_from_string(m.get<std::string>()));
    }
  }
  detail::read(doc, "total_steps", c.total_steps);
  detail::read(doc, "n_runs", c.n_runs);
  detail::read(doc, "base_seed", c.base_seed);
  detail::read(doc, "output_dir", c.output_dir);
  detail::read(doc, "parallel_runs", c.parallel_runs);

  if (doc.contains("env")) {
    const json& e = doc["env"];
    if (env_name == "frozenlake") {
      detail::reject_unknown(e, {"name", "n", "m", "hole_prob", "p_slip", "episode_cap"}, "env");
      detail::read(e, "n", c.env.lake.n);
      detail::read(e, "m", c.env.lake.m);
      detail::read(e, "hole_prob", c.env.lake.hole_prob);
      detail::read(e, "p_slip", c.env.lake.p_slip);
      detail::read(e, "episode_cap", c.env.lake.episode_cap);
    } else if (env_name == "lotsizing") {
      detail::reject_unknown(
          e,
          {"name", "items", "machines", "i_max", "horizon", "initial_inventory", "setup_cost",
           "holding_cost", "lost_sale_cost", "production", "max_setup_loss_fraction",
           "demand_mean", "compat_density", "instance_seed"},
          "env");
      auto& l = c.env.lot;
      detail::read(e, "items", l.items);
      detail::read(e, "machines", l.machines);
      detail::read(e, "i_max", l.i_max);
      detail::read(e, "horizon", l.horizon);
      detail::read(e, "initial_inventory", l.initial_inventory);
      detail::read_range(e, "setup_cost", l.setup_cost);
      detail::read_range(e, "holding_cost", l.holding_cost);
      detail::read_range(e, "lost_sale_cost", l.lost_sale_cost);
      detail::read_range(e, "production", l.production);
      detail::read(e, "max_setup_loss_fraction", l.max_setup_loss_fraction);
      detail::read_range(e, "demand_mean", l.demand_mean);
      detail::read(e, "compat_density", l.compat_density);
      detail::read(e, "instance_seed", c.env.instance_seed);
    } else {
      detail::reject_unknown(e, {"name", "arms"}, "env");
      detail::read(e, "arms", c.env.arms);
    }
  }

  if (doc.contains("agent_config")) {
    const json& a = doc["agent_config"];
    detail::reject_unknown(
        a,
        {"gamma", "clip_eps", "entropy_coef", "value_coef", "epochs", "window",
         "minibatch_size", "lr_actor", "lr_critic", "grad_max_norm", "advantage_normalize",
         "pre_stream", "hidden", "activation", "optimizer"},
        "agent_config");
    auto& g = c.agent_cfg;
    detail::read(a, "gamma", g.gamma);
    detail::read(a, "clip_eps", g.clip_eps);
    detail::read(a, "entropy_coef", g.entropy_coef);
    detail::read(a, "value_coef", g.value_coef);
    detail::read(a, "epochs", g.epochs);
    detail::read(a, "window", g.window);
    detail::read(a, "minibatch_size", g.minibatch_size);
    detail::read(a, "lr_actor", g.lr_actor);
    detail::read(a, "lr_critic", g.lr_critic);
    detail::read(a, "grad_max_norm", g.grad_max_norm);
    detail::read(a, "advantage_normalize", g.advantage_normalize);
    detail::read(a, "hidden", g.hidden);
    if (a.contains("pre_stream")) g.pre_stream = agents::pre_stream_from_string(a["pre_stream"].get<std::string>());
    if (a.contains("activation")) g.activation = nn::activation_from_string(a["activation"].get<std::string>());
    if (a.contains("optimizer")) g.optimizer = nn::optimizer_from_string(a["optimizer"].get<std::string>());
  }
  c.validate();
  return c;
}

/// Layered resolution: built-in defaults < each document in order.
inline ExperimentConfig resolve_layers(const std::vector<json>& layers) {
  json merged = json::object();
  for (const auto& layer : layers) merged.merge_patch(layer);
  return resolve_config(merged);
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

inline json to_json(const ExperimentConfig& c) {
  json methods = json::array();
  for (auto m : c.methods) methods.push_back(std::string(agents::to_string(m)));
  json env{{"name", c.env.name}};
  if (c.env.name == "frozenlake") {
    env.update({{"n", c.env.lake.n},
                {"m", c.env.lake.m},
                {"hole_prob", c.env.lake.hole_prob},
                {"p_slip", c.env.lake.p_slip},
                {"episode_cap", c.env.lake.episode_cap}});
  } else if (c.env.name == "lotsizing") {
    const auto& l = c.env.lot;
    env.update({{"items", l.items},
                {"machines", l.machines},
                {"i_max", l.i_max},
                {"horizon", l.horizon},
                {"initial_inventory", l.initial_inventory},
                {"setup_cost", {l.setup_cost.first, l.setup_cost.second}},
                {"holding_cost", {l.holding_cost.first, l.holding_cost.second}},
                {"lost_sale_cost", {l.lost_sale_cost.first, l.lost_sale_cost.second}},
                {"production", {l.production.first, l.production.second}},
                {"max_setup_loss_fraction", l.max_setup_loss_fraction},
                {"demand_mean", {l.demand_mean.first, l.demand_mean.second}},
                {"compat_density", l.compat_density},
                {"instance_seed", c.env.instance_seed}});
  } else {
    env["arms"] = c.env.arms;
  }
  const auto& g = c.agent_cfg;
  json agent_cfg{{"gamma", g.gamma},
                 {"clip_eps", g.clip_eps},
                 {"entropy_coef", g.entropy_coef},
                 {"value_coef", g.value_coef},
                 {"epochs", g.epochs},
                 {"window", g.window},
                 {"minibatch_size", g.minibatch_size},
                 {"lr_actor", g.lr_actor},
                 {"lr_critic", g.lr_critic},
                 {"grad_max_norm", g.grad_max_norm},
                 {"advantage_normalize", g.advantage_normalize},
                 {"pre_stream", std::string(agents::to_string(g.pre_stream))},
                 {"hidden", g.hidden},
                 {"activation", std::string(nn::to_string(g.activation))},
                 {"optimizer", std::string(nn::to_string(g.optimizer))}};
  return json{{"agent", std::string(agents::to_string(c.agent))},
              {"methods", methods},
              {"env", env},
              {"agent_config", agent_cfg},
              {"total_steps", c.total_steps},
              {"n_runs", c.n_runs},
              {"base_seed", c.base_seed},
              {"output_dir", c.output_dir},
              {"parallel_runs", c.parallel_runs}};
}

/// Lot-sizing instance for a run: fixed by instance_seed unless it is negative.
inline env::lot::Params lot_instance(const EnvSpec& spec, std::uint64_t run_seed) {
  const std::uint64_t seed =
      spec.instance_seed >= 0 ? static_cast<std::uint64_t>(spec.instance_seed) : run_seed;
  Rng rng = make_rng(seed, SeedStream::instance);
  return env::lot::make_instance(spec.lot, rng);
}

/// Environment for one run. Frozen Lake grids are drawn from the run seed.
inline std::unique_ptr<env::Environment> make_environment(const EnvSpec& spec,
                                                          std::uint64_t run_seed) {
  if (spec.name == "frozenlake") return std::make_unique<env::FrozenLake>(spec.lake, run_seed);
  if (spec.name == "lotsizing") return std::make_unique<env::LotSizing>(lot_instance(spec, run_seed));
  if (spec.name == "bandit") return std::make_unique<env::Bandit>(spec.arms);
  throw ConfigError("unknown env '" + spec.name + "'");
}

}  // namespace pdppo::harness
