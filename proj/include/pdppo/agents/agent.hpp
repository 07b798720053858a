#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "pdppo/agents/categorical.hpp"
#include "pdppo/agents/config.hpp"
#include "pdppo/agents/objectives.hpp"
#include "pdppo/env/environment.hpp"
#include "pdppo/error.hpp"
#include "pdppo/nn/mlp.hpp"
#include "pdppo/nn/optimizer.hpp"
#include "pdppo/random.hpp"

namespace pdppo::agents {

/// Means over all minibatches of one update call, plus ratio diagnostics.
struct UpdateStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;       // critic on s (ppo, pdppo)
  double post_critic_loss = 0.0;  // critic on s^x (pdppo, pdppo1c)
  double entropy = 0.0;
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double min_clipped_ratio = 1.0;  // range of clip(rho) seen by the surrogate
  double max_clipped_ratio = 1.0;
  double first_minibatch_max_ratio_dev = 0.0;  // max |rho - 1| before any step
  int minibatches = 0;
};

/// Actor plus the critics its kind requires, each with its own optimizer.
class Agent {
 public:
  Agent(AgentKind kind, int obs_dim, env::ActionSpec spec, AgentConfig cfg, Rng& init_rng)
      : kind_(kind), spec_(std::move(spec)), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (obs_dim < 1) throw ConfigError("observation dimension must be positive");
    actor_ = nn::make_mlp(obs_dim, cfg_.hidden, spec_.total_arity(), cfg_.activation,
                          nn::Head::softmax, init_rng, spec_.arities);
    old_actor_ = actor_;
    actor_opt_ = nn::Optimizer(cfg_.optimizer, cfg_.lr_actor);
    if (uses_pre_critic(kind_)) {
      critic_pre_ = nn::make_mlp(obs_dim, cfg_.hidden, 1, cfg_.activation, nn::Head::linear,
                                 init_rng);
      critic_pre_opt_ = nn::Optimizer(cfg_.optimizer, cfg_.lr_critic);
    }
    if (uses_post_critic(kind_)) {
      critic_post_ = nn::make_mlp(obs_dim, cfg_.hidden, 1, cfg_.activation, nn::Head::linear,
                                  init_rng);
      critic_post_opt_ = nn::Optimizer(cfg_.optimizer, cfg_.lr_critic);
    }
  }

  AgentKind kind() const { return kind_; }
  const AgentConfig& config() const { return cfg_; }
  const env::ActionSpec& action_spec() const { return spec_; }

  nn::MlpNet& actor() { return actor_; }
  const nn::MlpNet& actor() const { return actor_; }
  const nn::MlpNet& old_actor() const { return old_actor_; }
  nn::MlpNet* critic_pre() { return critic_pre_ ? &*critic_pre_ : nullptr; }
  const nn::MlpNet* critic_pre() const { return critic_pre_ ? &*critic_pre_ : nullptr; }
  nn::MlpNet* critic_post() { return critic_post_ ? &*critic_post_ : nullptr; }
  const nn::MlpNet* critic_post() const { return critic_post_ ? &*critic_post_ : nullptr; }

  /// Samples from the behaviour (old) policy.
  ActionSample act(const env::ObsVec& obs, Rng& rng) const {
    return sample_action(old_actor_, obs, spec_.arities, rng);
  }

  env::Action act_greedy(const env::ObsVec& obs) const {
    const nn::Vector probs = actor_.forward(obs);
    return greedy_action(probs, spec_.arities);
  }

  /// Restores networks (e.g. from a checkpoint) and syncs the old policy.
  void load_networks(nn::MlpNet actor, std::optional<nn::MlpNet> critic_pre,
                     std::optional<nn::MlpNet> critic_post) {
    if (!actor.same_shape(actor_)) throw ShapeError("checkpoint actor shape mismatch");
    actor_ = std::move(actor);
    old_actor_ = actor_;
    auto assign = [](std::optional<nn::MlpNet>& dst, std::optional<nn::MlpNet>& src) {
      if (!dst) return;
      if (!src || !src->same_shape(*dst)) throw ShapeError("checkpoint critic shape mismatch");
      dst = std::move(src);
    };
    assign(critic_pre_, critic_pre);
    assign(critic_post_, critic_post);
  }

  /// K epochs of shuffled minibatch updates on one window, then
  /// old policy <- current policy.
  UpdateStats update(const std::vector<Transition>& buffer, Rng& rng) {
    if (static_cast<int>(buffer.size()) != cfg_.window) {
      throw StateError("update expects exactly " + std::to_string(cfg_.window) +
                       " transitions, got " + std::to_string(buffer.size()));
    }
    Trajectory traj;
    traj.transitions = buffer;
    compute_returns(traj, kind_, cfg_);

    const auto n = static_cast<Eigen::Index>(buffer.size());
    const nn::Matrix obs =
        stack_columns(traj, [](const Transition& t) -> const env::ObsVec& { return t.obs; });
    const nn::Matrix post_obs = stack_columns(
        traj, [](const Transition& t) -> const env::ObsVec& { return t.post_obs; });

    UpdateStats stats;
    stats.min_clipped_ratio = std::numeric_limits<double>::infinity();
    stats.max_clipped_ratio = -std::numeric_limits<double>::infinity();
    double ratio_sum = 0.0;
    long ratio_count = 0;
    long clipped = 0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const int mb = cfg_.effective_minibatch();

    nn::GradientTape actor_tape(actor_);
    nn::GradientTape pre_tape = critic_pre_ ? nn::GradientTape(*critic_pre_) : nn::GradientTape();
    nn::GradientTape post_tape =
        critic_post_ ? nn::GradientTape(*critic_post_) : nn::GradientTape();

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      // Advantages use the critics as they stand at the start of the epoch.
      compute_advantages(traj, critic_pre(), critic_post(), cfg_);
      std::shuffle(order.begin(), order.end(), rng);

      for (Eigen::Index start = 0; start < n; start += mb) {
        const Eigen::Index end = std::min<Eigen::Index>(start + mb, n);
        const std::vector<Eigen::Index> idx(order.begin() + start, order.begin() + end);
        const auto b = static_cast<double>(idx.size());

        double pre_loss = 0.0;
        double post_loss = 0.0;
        if (critic_pre_) {
          std::vector<double> targets;
          for (auto i : idx) targets.push_back(traj.returns_pre[static_cast<std::size_t>(i)]);
          pre_loss = critic_step(*critic_pre_, critic_pre_opt_, pre_tape, obs(Eigen::all, idx),
                                 targets);
        }
        if (critic_post_) {
          std::vector<double> targets;
          for (auto i : idx) targets.push_back(traj.returns_post[static_cast<std::size_t>(i)]);
          post_loss = critic_step(*critic_post_, critic_post_opt_, post_tape,
                                  post_obs(Eigen::all, idx), targets);
        }

        // Actor step.
        const nn::ForwardCache cache = actor_.forward_cached(obs(Eigen::all, idx));
        const nn::Matrix& probs = cache.output;
        if (!probs.allFinite()) throw NumericError("actor produced non-finite probabilities");
        nn::Matrix grad_logits = nn::Matrix::Zero(probs.rows(), probs.cols());
        std::vector<double> ratios(idx.size()), advs(idx.size()), ents(idx.size());
        double max_dev = 0.0;
        for (std::size_t s = 0; s < idx.size(); ++s) {
          const Transition& tr = buffer[static_cast<std::size_t>(idx[s])];
          const auto col = static_cast<Eigen::Index>(s);
          const auto p = probs.col(col);
          const double logp = log_prob(p, tr.action, spec_.arities);
          const double rho = importance_ratio(logp, tr.logp_old);
          const double adv = traj.advantages[static_cast<std::size_t>(idx[s])];
          ratios[s] = rho;
          advs[s] = adv;
          max_dev = std::max(max_dev, std::abs(rho - 1.0));

          const double clipped_rho = clip_ratio(rho, cfg_.clip_eps);
          stats.min_clipped_ratio = std::min(stats.min_clipped_ratio, clipped_rho);
          stats.max_clipped_ratio = std::max(stats.max_clipped_ratio, clipped_rho);
          if (clipped_rho != rho) ++clipped;
          ratio_sum += rho;
          ++ratio_count;

          // d(-min(rho A, clip(rho) A))/d logp: the unclipped branch carries rho*A,
          // the clipped branch is flat.
          const bool unclipped_active = rho * adv <= clipped_rho * adv;
          const double dlogp = unclipped_active ? -rho * adv / b : 0.0;

          double h_total = 0.0;
          Eigen::Index offset = 0;
          for (std::size_t g = 0; g < spec_.arities.size(); ++g) {
            const int k = spec_.arities[g];
            double h = 0.0;
            for (int j = 0; j < k; ++j) {
              const double pj = p(offset + j);
              if (pj > 0.0) h -= pj * std::log(pj);
            }
            h_total += h;
            for (int j = 0; j < k; ++j) {
              const double pj = p(offset + j);
              const double onehot = (j == tr.action[g]) ? 1.0 : 0.0;
              double gz = dlogp * (onehot - pj);
              // -c1 * H / b, with dH/dz_j = -p_j (log p_j + H)
              if (pj > 0.0) gz += cfg_.entropy_coef / b * pj * (std::log(pj) + h);
              grad_logits(offset + j, col) = gz;
            }
            offset += k;
          }
          ents[s] = h_total;
        }
        if (stats.minibatches == 0) stats.first_minibatch_max_ratio_dev = max_dev;

        actor_tape.zero();
        actor_.backward_logits(cache, grad_logits, actor_tape);
        nn::clip_global_norm_inplace(actor_tape, cfg_.grad_max_norm);
        actor_opt_.apply_update(actor_, actor_tape);

        stats.actor_loss += actor_loss(ratios, advs, ents, pre_loss + post_loss, cfg_);
        stats.critic_loss += pre_loss;
        stats.post_critic_loss += post_loss;
        double ent_mean = 0.0;
        for (double e : ents) ent_mean += e;
        stats.entropy += ent_mean / b;
        ++stats.minibatches;
      }
    }

    if (stats.minibatches > 0) {
      const double m = stats.minibatches;
      stats.actor_loss /= m;
      stats.critic_loss /= m;
      stats.post_critic_loss /= m;
      stats.entropy /= m;
      stats.mean_ratio = ratio_sum / static_cast<double>(ratio_count);
      stats.clip_fraction = static_cast<double>(clipped) / static_cast<double>(ratio_count);
    } else {
      stats.min_clipped_ratio = 1.0;
      stats.max_clipped_ratio = 1.0;
    }
    old_actor_ = actor_;
    return stats;
  }

 private:
  template <typename Obs>
  static double critic_step(nn::MlpNet& critic, nn::Optimizer& opt, nn::GradientTape& tape,
                            const Obs& obs, const std::vector<double>& targets) {
    const nn::ForwardCache cache = critic.forward_cached(obs);
    const auto b = static_cast<double>(targets.size());
    nn::Matrix grad(1, cache.output.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < cache.output.cols(); ++i) {
      const double e = cache.output(0, i) - targets[static_cast<std::size_t>(i)];
      loss += e * e;
      grad(0, i) = 2.0 * e / b;
    }
    tape.zero();
    critic.backward(cache, grad, tape);
    opt.apply_update(critic, tape);
    return loss / b;
  }

  AgentKind kind_;
  env::ActionSpec spec_;
  AgentConfig cfg_;
  nn::MlpNet actor_;
  nn::MlpNet old_actor_;
  nn::Optimizer actor_opt_;
  std::optional<nn::MlpNet> critic_pre_;
  std::optional<nn::MlpNet> critic_post_;
  nn::Optimizer critic_pre_opt_;
  nn::Optimizer critic_post_opt_;
};

/// One logged update window.
struct WindowRecord {
  long step = 0;  // environment steps completed at the end of the window
  double window_reward = 0.0;
  double cumulative_reward = 0.0;
  UpdateStats stats;
};

struct RunLog {
  std::vector<WindowRecord> windows;
  std::vector<double> episode_rewards;  // completed episodes only

  double max_window_reward() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& w : windows) m = std::max(m, w.window_reward);
    return m;
  }
  double total_reward() const { return windows.empty() ? 0.0 : windows.back().cumulative_reward; }
};

/// Alternates windows of `window` environment steps with update() calls.
/// Episodes continue across window boundaries; after done the environment is
/// reset with a seed drawn from `rng`.
inline RunLog train(Agent& agent, env::Environment& environment, long total_steps, Rng& rng) {
  const AgentConfig& cfg = agent.config();
  if (total_steps < cfg.window) throw ConfigError("total_steps must be >= the update window");
  const long windows = total_steps / cfg.window;

  RunLog log;
  log.windows.reserve(static_cast<std::size_t>(windows));
  env::ObsVec obs = environment.reset(rng());
  double cumulative = 0.0;
  double episode = 0.0;
  long step = 0;
  std::vector<Transition> buffer;
  buffer.reserve(static_cast<std::size_t>(cfg.window));

  for (long w = 0; w < windows; ++w) {
    buffer.clear();
    double window_reward = 0.0;
    for (int s = 0; s < cfg.window; ++s) {
      ActionSample a = agent.act(obs, rng);
      auto [post_obs, det_reward] = environment.step_deterministic(a.action);
      env::StochasticOutcome st = environment.step_stochastic();
      const double total = det_reward + st.reward;
      buffer.push_back(Transition{std::move(obs), std::move(a.action), a.logp, det_reward,
                                  std::move(post_obs), total, st.done});
      window_reward += total;
      episode += total;
      ++step;
      if (st.done) {
        log.episode_rewards.push_back(episode);
        episode = 0.0;
        obs = environment.reset(rng());
      } else {
        obs = std::move(st.next_obs);
      }
    }
    cumulative += window_reward;
    UpdateStats stats = agent.update(buffer, rng);
    log.windows.push_back(WindowRecord{step, window_reward, cumulative, stats});
  }
  return log;
}

/// Builds a fresh agent (initialised from one draw of `rng`) and trains it.
inline RunLog train(AgentKind kind, env::Environment& environment, const AgentConfig& cfg,
                    long total_steps, Rng& rng) {
  Rng init_rng(rng());
  Agent agent(kind, environment.obs_dim(), environment.action_spec(), cfg, init_rng);
  return train(agent, environment, total_steps, rng);
}

/// Mean total reward of the greedy policy over `episodes` fresh episodes.
inline double evaluate_greedy(const Agent& agent, env::Environment& environment, int episodes,
                              Rng& rng, long step_cap = 100000) {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env::ObsVec obs = environment.reset(rng());
    for (long s = 0; s < step_cap; ++s) {
      const auto out = environment.step(agent.act_greedy(obs));
      sum += out.total_reward;
      if (out.done) break;
      obs = out.next_obs;
    }
  }
  return sum / episodes;
}

}  // namespace pdppo::agents
