#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pdppo/env/environment.hpp"
#include "pdppo/error.hpp"

namespace pdppo::env {

/// Single-state bandit with fixed arm rewards; every episode is one step.
/// The post-decision observation is a one-hot of the pulled arm.
class Bandit final : public Environment {
 public:
  explicit Bandit(std::vector<double> arm_rewards = {1.0, 0.0})
      : rewards_(std::move(arm_rewards)) {
    if (rewards_.empty()) throw ConfigError("bandit needs at least one arm");
  }

  int obs_dim() const override { return static_cast<int>(rewards_.size()) + 1; }
  ActionSpec action_spec() const override {
    return ActionSpec::discrete(static_cast<int>(rewards_.size()));
  }
  std::string name() const override { return "bandit"; }

 protected:
  ObsVec do_reset(std::uint64_t) override {
    ObsVec obs = ObsVec::Zero(obs_dim());
    obs(0) = 1.0;
    return obs;
  }

  std::pair<ObsVec, double> do_step_deterministic(const Action& a) override {
    post_ = ObsVec::Zero(obs_dim());
    post_(1 + a[0]) = 1.0;
    return {post_, rewards_[static_cast<std::size_t>(a[0])]};
  }

  StochasticOutcome do_step_stochastic() override { return {post_, 0.0, true}; }

 private:
  std::vector<double> rewards_;
  ObsVec post_;
};

}  // namespace pdppo::env
