#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pdppo/error.hpp"

namespace pdppo::env {

using ObsVec = Eigen::VectorXd;

/// One index per action component; a plain discrete action has one entry.
using Action = std::vector<int>;

struct ActionSpec {
  enum class Kind { discrete, multi_discrete };

  Kind kind = Kind::discrete;
  std::vector<int> arities;

  static ActionSpec discrete(int n) {
    if (n < 1) throw ConfigError("discrete action space needs n >= 1");
    return {Kind::discrete, {n}};
  }
  static ActionSpec multi_discrete(std::vector<int> ns) {
    if (ns.empty()) throw ConfigError("multi_discrete action space needs components");
    for (int n : ns) {
      if (n < 1) throw ConfigError("multi_discrete arity must be >= 1");
    }
    return {Kind::multi_discrete, std::move(ns)};
  }

  std::size_t components() const { return arities.size(); }

  int total_arity() const {
    int t = 0;
    for (int n : arities) t += n;
    return t;
  }

  void validate(const Action& a) const {
    if (a.size() != arities.size()) {
      throw InvalidActionError("action has " + std::to_string(a.size()) +
                               " components, expected " +
                               std::to_string(arities.size()));
    }
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (a[j] < 0 || a[j] >= arities[j]) {
        throw InvalidActionError("action component " + std::to_string(j) + " = " +
                                 std::to_string(a[j]) + " out of range [0, " +
                                 std::to_string(arities[j]) + ")");
      }
    }
  }

  bool operator==(const ActionSpec&) const = default;
};

/// Result of a full two-phase step.
struct StepOutcome {
  ObsVec post_obs;       // s^x
  double det_reward = 0.0;
  ObsVec next_obs;       // s'
  double total_reward = 0.0;  // det_reward + stochastic-phase reward
  bool done = false;
  std::map<std::string, double> info;
};

struct StochasticOutcome {
  ObsVec next_obs;
  double reward = 0.0;
  bool done = false;
};

/// Post-decision environment contract. A step is split into a deterministic
/// phase (decision effects, s -> s^x) and a stochastic phase (exogenous
/// information, s^x -> s'). Valid call sequences are
/// reset (step_deterministic step_stochastic)*, with reset required after done.
class Environment {
 public:
  enum class Phase { needs_reset, pre_decision, post_decision, finished };

  virtual ~Environment() = default;

  virtual int obs_dim() const = 0;
  virtual ActionSpec action_spec() const = 0;
  virtual std::string name() const = 0;

  ObsVec reset(std::uint64_t seed) {
    ObsVec obs = do_reset(seed);
    check_obs(obs);
    phase_ = Phase::pre_decision;
    return obs;
  }

  std::pair<ObsVec, double> step_deterministic(const Action& action) {
    if (phase_ == Phase::post_decision) {
      throw PhaseError("step_deterministic called twice without step_stochastic");
    }
    if (phase_ != Phase::pre_decision) {
      throw PhaseError("step_deterministic called before reset or after done");
    }
    action_spec().validate(action);
    auto result = do_step_deterministic(action);
    check_obs(result.first);
    phase_ = Phase::post_decision;
    return result;
  }

  StochasticOutcome step_stochastic() {
    if (phase_ != Phase::post_decision) {
      throw PhaseError("step_stochastic called without a pending deterministic phase");
    }
    StochasticOutcome out = do_step_stochastic();
    check_obs(out.next_obs);
    phase_ = out.done ? Phase::finished : Phase::pre_decision;
    return out;
  }

  /// Both phases in one call.
  StepOutcome step(const Action& action) {
    StepOutcome out;
    auto [post, det] = step_deterministic(action);
    out.post_obs = std::move(post);
    out.det_reward = det;
    StochasticOutcome stoch = step_stochastic();
    out.next_obs = std::move(stoch.next_obs);
    out.total_reward = det + stoch.reward;
    out.done = stoch.done;
    out.info["stoch_reward"] = stoch.reward;
    return out;
  }

  Phase phase() const { return phase_; }

 protected:
  virtual ObsVec do_reset(std::uint64_t seed) = 0;
  virtual std::pair<ObsVec, double> do_step_deterministic(const Action& action) = 0;
  virtual StochasticOutcome do_step_stochastic() = 0;

 private:
  void check_obs(const ObsVec& obs) const {
    if (obs.size() != obs_dim()) {
      throw ShapeError(name() + ": observation length " + std::to_string(obs.size()) +
                       " != declared " + std::to_string(obs_dim()));
    }
    if (!obs.allFinite()) throw NumericError(name() + ": non-finite observation");
  }

  Phase phase_ = Phase::needs_reset;
};

}  // namespace pdppo::env
