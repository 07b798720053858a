#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pdppo/agents/config.hpp"
#include "pdppo/env/environment.hpp"
#include "pdppo/error.hpp"
#include "pdppo/nn/mlp.hpp"

namespace pdppo::agents {

/// One environment step as stored for an update.
struct Transition {
  env::ObsVec obs;        // s_t
  env::Action action;
  double logp_old = 0.0;  // log pi_old(a_t | s_t)
  double det_reward = 0.0;
  env::ObsVec post_obs;   // s^x_t
  double total_reward = 0.0;
  bool done = false;
};

/// Transitions plus the quantities computed from them before an update.
struct Trajectory {
  std::vector<Transition> transitions;
  std::vector<double> returns_pre;   // R_t
  std::vector<double> returns_post;  // R^x_t
  std::vector<double> adv_pre;
  std::vector<double> adv_post;
  std::vector<double> advantages;    // the advantage the actor sees

  std::size_t size() const { return transitions.size(); }
};

/// R_t = r_t + gamma * R_{t+1}, restarting after every done flag.
inline std::vector<double> discounted_returns(std::span<const double> rewards,
                                              const std::vector<bool>& dones, double gamma) {
  if (rewards.size() != dones.size()) throw ShapeError("rewards and dones differ in length");
  std::vector<double> out(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    if (dones[t]) running = 0.0;
    running = rewards[t] + gamma * running;
    out[t] = running;
  }
  return out;
}

/// Fills returns_pre and returns_post. For ppo the single return stream uses
/// the full step reward.
inline void compute_returns(Trajectory& traj, AgentKind kind, const AgentConfig& cfg) {
  const std::size_t n = traj.size();
  std::vector<double> pre(n), post(n);
  std::vector<bool> dones(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& tr = traj.transitions[t];
    const bool pre_total = kind == AgentKind::ppo || cfg.pre_stream == PreStream::total;
    pre[t] = pre_total ? tr.total_reward : tr.det_reward;
    post[t] = tr.total_reward;
    dones[t] = tr.done;
  }
  traj.returns_pre = discounted_returns(pre, dones, cfg.gamma);
  traj.returns_post = discounted_returns(post, dones, cfg.gamma);
}

/// Mean 0, SD 1 (sample SD, floored at 1e-8).
inline void standardize(std::vector<double>& v) {
  if (v.empty()) return;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  const double denom = std::max(sd, 1e-8);
  for (double& x : v) x = (x - mean) / denom;
}

/// Stacks the selected observations as columns.
template <typename Get>
nn::Matrix stack_columns(const Trajectory& traj, Get get) {
  const std::size_t n = traj.size();
  if (n == 0) return {};
  nn::Matrix m(get(traj.transitions[0]).size(), static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n; ++t) m.col(static_cast<Eigen::Index>(t)) = get(traj.transitions[t]);
  return m;
}

/// Computes A^pre = R - V(s), A^x = R^x - V^x(s^x) for whichever critics are
/// given, and sets `advantages` to their elementwise max (or the single
/// available one). Normalisation, if enabled, applies to `advantages` only.
inline void compute_advantages(Trajectory& traj, const nn::MlpNet* critic_pre,
                               const nn::MlpNet* critic_post, const AgentConfig& cfg) {
  const std::size_t n = traj.size();
  if (traj.returns_pre.size() != n || traj.returns_post.size() != n) {
    throw StateError("returns must be computed before advantages");
  }
  if (critic_pre == nullptr && critic_post == nullptr) {
    throw StateError("at least one critic is required");
  }
  traj.adv_pre.assign(n, 0.0);
  traj.adv_post.assign(n, 0.0);
  if (critic_pre != nullptr) {
    const nn::Matrix v = critic_pre->forward_batch(
        stack_columns(traj, [](const Transition& t) -> const env::ObsVec& { return t.obs; }));
    for (std::size_t t = 0; t < n; ++t) traj.adv_pre[t] = traj.returns_pre[t] - v(0, static_cast<Eigen::Index>(t));
  }
  if (critic_post != nullptr) {
    const nn::Matrix v = critic_post->forward_batch(stack_columns(
        traj, [](const Transition& t) -> const env::ObsVec& { return t.post_obs; }));
    for (std::size_t t = 0; t < n; ++t) traj.adv_post[t] = traj.returns_post[t] - v(0, static_cast<Eigen::Index>(t));
  }
  traj.advantages.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (critic_pre != nullptr && critic_post != nullptr) {
      traj.advantages[t] = std::max(traj.adv_pre[t], traj.adv_post[t]);
    } else if (critic_pre != nullptr) {
      traj.advantages[t] = traj.adv_pre[t];
    } else {
      traj.advantages[t] = traj.adv_post[t];
    }
  }
  if (cfg.advantage_normalize) standardize(traj.advantages);
}

inline constexpr double kLogRatioClamp = 50.0;

/// exp(logp_new - logp_old), exponent clamped to +-50.
inline double importance_ratio(double logp_new, double logp_old) {
  return std::exp(std::clamp(logp_new - logp_old, -kLogRatioClamp, kLogRatioClamp));
}

inline double clip_ratio(double ratio, double eps) {
  return std::clamp(ratio, 1.0 - eps, 1.0 + eps);
}

/// min(rho * A, clip(rho, 1 - eps, 1 + eps) * A).
inline double clipped_surrogate(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, clip_ratio(ratio, eps) * advantage);
}

/// Minimised actor objective:
/// mean(-surrogate) - c1 * mean(entropy) + c2 * critic_losses.
/// The critic term carries no gradient into the actor.
inline double actor_loss(std::span<const double> ratios, std::span<const double> advantages,
                         std::span<const double> entropies, double critic_losses,
                         const AgentConfig& cfg) {
  if (ratios.size() != advantages.size() || ratios.size() != entropies.size()) {
    throw ShapeError("actor_loss inputs differ in length");
  }
  if (ratios.empty()) return cfg.value_coef * critic_losses;
  double surrogate = 0.0;
  double ent = 0.0;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    surrogate += clipped_surrogate(ratios[i], advantages[i], cfg.clip_eps);
    ent += entropies[i];
  }
  const auto n = static_cast<double>(ratios.size());
  return -surrogate / n - cfg.entropy_coef * ent / n + cfg.value_coef * critic_losses;
}

/// Mean squared error between V(obs) and the returns. Columns of `obs` are samples.
inline double critic_loss(const nn::MlpNet& critic, const nn::Matrix& obs,
                          std::span<const double> returns) {
  if (static_cast<std::size_t>(obs.cols()) != returns.size()) {
    throw ShapeError("critic_loss inputs differ in length");
  }
  if (returns.empty()) return 0.0;
  const nn::Matrix v = critic.forward_batch(obs);
  double s = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    const double e = v(0, static_cast<Eigen::Index>(i)) - returns[i];
    s += e * e;
  }
  return s / static_cast<double>(returns.size());
}

}  // namespace pdppo::agents
