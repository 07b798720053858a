#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdppo/env/environment.hpp"
#include "pdppo/error.hpp"
#include "pdppo/random.hpp"

namespace pdppo::env {

/// Modified slippery Frozen Lake: the chosen move is applied deterministically
/// (post-decision cell), then the agent may slip to an adjacent tile.
namespace lake {

enum class Cell : std::uint8_t { frozen, hole, start, goal };

/// Gym ordering.
enum Move : int { left = 0, down = 1, right = 2, up = 3 };
inline constexpr int kNumMoves = 4;

struct Config {
  int n = 10;
  int m = 10;
  double hole_prob = 0.8;
  double p_slip = 0.5;
  int episode_cap = 200;

  void validate() const {
    if (n < 2 || m < 2) throw ConfigError("frozen lake needs n, m >= 2");
    if (hole_prob < 0.0 || hole_prob > 1.0) throw ConfigError("hole_prob must be in [0,1]");
    if (p_slip < 0.0 || p_slip > 1.0) throw ConfigError("p_slip must be in [0,1]");
    if (episode_cap < 1) throw ConfigError("episode_cap must be >= 1");
  }
};

struct Grid {
  int n = 0;
  int m = 0;
  double hole_prob = 0.0;
  std::vector<Cell> cells;  // row-major

  Cell at(int row, int col) const { return cells[static_cast<std::size_t>(row * m + col)]; }
  Cell& at(int row, int col) { return cells[static_cast<std::size_t>(row * m + col)]; }
  int size() const { return n * m; }

  bool terminal(int row, int col) const {
    const Cell c = at(row, col);
    return c == Cell::hole || c == Cell::goal;
  }
};

struct Position {
  int row = 0;
  int col = 0;
  bool operator==(const Position&) const = default;
};

enum class Phase { pre_decision, post_decision };

struct State {
  Position pos;
  Phase phase = Phase::pre_decision;
  bool done = false;
  int steps = 0;
};

/// Start at (0,0), goal at (n-1,m-1); every other cell is a hole with
/// probability hole_prob, independently.
inline Grid generate_grid(int n, int m, double hole_prob, Rng& rng) {
  if (n < 2 || m < 2) throw ConfigError("frozen lake needs n, m >= 2");
  Grid g{n, m, hole_prob, std::vector<Cell>(static_cast<std::size_t>(n * m), Cell::frozen)};
  std::bernoulli_distribution is_hole(hole_prob);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < m; ++c) {
      if ((r == 0 && c == 0) || (r == n - 1 && c == m - 1)) continue;
      if (is_hole(rng)) g.at(r, c) = Cell::hole;
    }
  }
  g.at(0, 0) = Cell::start;
  g.at(n - 1, m - 1) = Cell::goal;
  return g;
}

inline double hole_penalty(const Grid& g) { return -1.0 / static_cast<double>(g.size()); }

/// Reward for landing on a cell, and whether it ends the episode.
inline std::pair<double, bool> landing_effect(const Grid& g, Position p) {
  switch (g.at(p.row, p.col)) {
    case Cell::goal: return {1.0, true};
    case Cell::hole: return {hole_penalty(g), true};
    default: return {0.0, false};
  }
}

inline Position shifted(const Grid& g, Position p, int move) {
  switch (move) {
    case left: p.col = std::max(0, p.col - 1); break;
    case down: p.row = std::min(g.n - 1, p.row + 1); break;
    case right: p.col = std::min(g.m - 1, p.col + 1); break;
    case up: p.row = std::max(0, p.row - 1); break;
    default: throw InvalidActionError("frozen lake move must be in [0, 4)");
  }
  return p;
}

/// Existing 4-neighbours of p, in move order.
inline std::vector<Position> neighbours(const Grid& g, Position p) {
  std::vector<Position> out;
  out.reserve(4);
  for (int mv = 0; mv < kNumMoves; ++mv) {
    const Position q = shifted(g, p, mv);
    if (!(q == p)) out.push_back(q);
  }
  return out;
}

/// Deterministic phase. A terminal post-decision cell charges its reward here
/// and ends the episode.
inline std::pair<State, double> move_deterministic(const State& s, int move, const Grid& g) {
  if (s.done) throw PhaseError("episode already finished");
  if (s.phase != Phase::pre_decision) throw PhaseError("agent is not at a decision point");
  State post = s;
  post.pos = shifted(g, s.pos, move);
  post.phase = Phase::post_decision;
  post.steps = s.steps + 1;
  auto [reward, terminal] = landing_effect(g, post.pos);
  post.done = terminal;
  return {post, reward};
}

struct SlipResult {
  State next;
  double reward = 0.0;
  bool done = false;
};

/// Stochastic phase: stay with probability 1 - p_slip, otherwise move to a
/// uniformly chosen existing neighbour.
inline SlipResult slip_stochastic(const State& post, const Grid& g, double p_slip,
                                  int episode_cap, Rng& rng) {
  if (post.phase != Phase::post_decision) throw PhaseError("no pending post-decision state");
  SlipResult out{post, 0.0, post.done};
  out.next.phase = Phase::pre_decision;
  if (post.done) return out;

  if (std::bernoulli_distribution(p_slip)(rng)) {
    const auto nb = neighbours(g, post.pos);
    std::uniform_int_distribution<std::size_t> pick(0, nb.size() - 1);
    out.next.pos = nb[pick(rng)];
  }
  auto [reward, terminal] = landing_effect(g, out.next.pos);
  out.reward = reward;
  out.done = terminal || out.next.steps >= episode_cap;
  out.next.done = out.done;
  return out;
}

/// One-hot position (n*m) followed by the hole mask (n*m).
inline ObsVec encode_observation(const State& s, const Grid& g) {
  const int cells = g.size();
  ObsVec obs = ObsVec::Zero(2 * cells);
  obs(s.pos.row * g.m + s.pos.col) = 1.0;
  for (int i = 0; i < cells; ++i) {
    if (g.cells[static_cast<std::size_t>(i)] == Cell::hole) obs(cells + i) = 1.0;
  }
  return obs;
}

}  // namespace lake

class FrozenLake final : public Environment {
 public:
  /// The grid is drawn once from `grid_seed`; episodes reuse it.
  FrozenLake(lake::Config cfg, std::uint64_t grid_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = make_rng(grid_seed, SeedStream::instance);
    grid_ = lake::generate_grid(cfg_.n, cfg_.m, cfg_.hole_prob, rng);
  }

  FrozenLake(lake::Config cfg, lake::Grid grid) : cfg_(cfg), grid_(std::move(grid)) {
    cfg_.validate();
    if (grid_.n != cfg_.n || grid_.m != cfg_.m) throw ConfigError("grid does not match config");
  }

  int obs_dim() const override { return 2 * cfg_.n * cfg_.m; }
  ActionSpec action_spec() const override { return ActionSpec::discrete(lake::kNumMoves); }
  std::string name() const override { return "frozenlake"; }

  const lake::Grid& grid() const { return grid_; }
  const lake::Config& config() const { return cfg_; }
  const lake::State& state() const { return state_; }

  /// Places the agent without touching RNG state; test hook.
  void set_position(lake::Position p) {
    state_.pos = p;
    state_.phase = lake::Phase::pre_decision;
    state_.done = false;
  }

 protected:
  ObsVec do_reset(std::uint64_t seed) override {
    rng_.seed(seed);
    state_ = lake::State{};
    return lake::encode_observation(state_, grid_);
  }

  std::pair<ObsVec, double> do_step_deterministic(const Action& a) override {
    auto [post, reward] = lake::move_deterministic(state_, a[0], grid_);
    state_ = post;
    return {lake::encode_observation(state_, grid_), reward};
  }

  StochasticOutcome do_step_stochastic() override {
    auto res = lake::slip_stochastic(state_, grid_, cfg_.p_slip, cfg_.episode_cap, rng_);
    state_ = res.next;
    return {lake::encode_observation(state_, grid_), res.reward, res.done};
  }

 private:
  lake::Config cfg_;
  lake::Grid grid_;
  lake::State state_;
  Rng rng_;
};

}  // namespace pdppo::env
