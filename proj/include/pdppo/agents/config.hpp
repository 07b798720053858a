#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "pdppo/error.hpp"
#include "pdppo/nn/mlp.hpp"
#include "pdppo/nn/optimizer.hpp"

namespace pdppo::agents {

/// ppo: one critic on s. pdppo: critics on s and s^x, max of the two
/// advantages. pdppo1c: one critic on s^x.
enum class AgentKind { ppo, pdppo, pdppo1c };

/// Which reward feeds the pre-decision return R_t.
enum class PreStream { deterministic_only, total };

inline std::string_view to_string(AgentKind k) {
  switch (k) {
    case AgentKind::ppo: return "ppo";
    case AgentKind::pdppo: return "pdppo";
    case AgentKind::pdppo1c: return "pdppo1c";
  }
  return "?";
}

inline AgentKind agent_kind_from_string(std::string_view s) {
  if (s == "ppo") return AgentKind::ppo;
  if (s == "pdppo") return AgentKind::pdppo;
  if (s == "pdppo1c") return AgentKind::pdppo1c;
  throw ConfigError("unknown agent '" + std::string(s) + "' (expected ppo, pdppo or pdppo1c)");
}

inline std::string_view to_string(PreStream p) {
  return p == PreStream::deterministic_only ? "deterministic_only" : "total";
}

inline PreStream pre_stream_from_string(std::string_view s) {
  if (s == "deterministic_only") return PreStream::deterministic_only;
  if (s == "total") return PreStream::total;
  throw ConfigError("unknown pre_stream '" + std::string(s) + "'");
}

inline bool uses_pre_critic(AgentKind k) { return k != AgentKind::pdppo1c; }
inline bool uses_post_critic(AgentKind k) { return k != AgentKind::ppo; }

struct AgentConfig {
  double gamma = 0.90;
  double clip_eps = 0.2;
  double entropy_coef = 0.001;  // c1
  double value_coef = 0.7;      // c2
  int epochs = 50;              // K
  int window = 500;             // u, steps between updates
  int minibatch_size = 0;       // 0 means window / 4
  double lr_actor = 0.00055;
  double lr_critic = 0.001;
  double grad_max_norm = 0.5;
  bool advantage_normalize = true;
  PreStream pre_stream = PreStream::deterministic_only;

  std::vector<int> hidden{64, 64};
  nn::Activation activation = nn::Activation::tanh;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;

  int effective_minibatch() const {
    if (minibatch_size > 0) return std::min(minibatch_size, window);
    return std::max(1, window / 4);
  }

  void validate() const {
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must be in [0,1]");
    if (!(clip_eps > 0.0)) throw ConfigError("clip_eps must be positive");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (window < 1) throw ConfigError("window must be >= 1");
    if (minibatch_size < 0) throw ConfigError("minibatch_size must be >= 0");
    if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(grad_max_norm > 0.0)) throw ConfigError("grad_max_norm must be positive");
    for (int h : hidden) {
      if (h <= 0) throw ConfigError("hidden layer sizes must be positive");
    }
  }

  /// Frozen Lake hyperparameters (200k training steps).
  static AgentConfig frozen_lake() { return AgentConfig{}; }

  /// Lot-sizing hyperparameters (1M training steps).
  static AgentConfig lot_sizing() {
    AgentConfig c;
    c.window = 400;
    c.epochs = 40;
    return c;
  }
};

}  // namespace pdppo::agents
