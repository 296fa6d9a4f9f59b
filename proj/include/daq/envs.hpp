#pragma once

// Benchmark environments and their expected-reward tabular models.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "daq/core.hpp"

namespace daq {

/// Explicit finite MDP. Each (s, a) row of `transitions` has num_states() + 1
/// entries; the last one is the probability of absorbing into Terminal.
struct TabularMdp {
  TableShape shape;
  double discount = 1.0;
  std::vector<double> transitions;  // shape.size() x (num_states + 1)
  std::vector<double> rewards;      // expected immediate reward per (s, a)

  TabularMdp() = default;
  TabularMdp(TableShape sh, double gamma)
      : shape(std::move(sh)),
        discount(gamma),
        transitions(shape.size() * (shape.num_states() + 1), 0.0),
        rewards(shape.size(), 0.0) {}

  std::size_t row_width() const { return shape.num_states() + 1; }
  std::size_t terminal_column() const { return shape.num_states(); }

  std::span<double> row(StateId s, ActionId a) {
    return {transitions.data() + shape.index(s, a) * row_width(), row_width()};
  }
  std::span<const double> row(StateId s, ActionId a) const {
    return {transitions.data() + shape.index(s, a) * row_width(), row_width()};
  }
  double& reward(StateId s, ActionId a) { return rewards[shape.index(s, a)]; }
  double reward(StateId s, ActionId a) const { return rewards[shape.index(s, a)]; }

  double terminal_probability(StateId s, ActionId a) const {
    return row(s, a)[terminal_column()];
  }
  /// True when (s, a) always ends the episode.
  bool terminates(StateId s, ActionId a) const { return terminal_probability(s, a) == 1.0; }

  void validate() const {
    if (!(discount >= 0.0 && discount <= 1.0))
      throw std::invalid_argument("TabularMdp: discount outside [0, 1]");
    for (StateId s = 0; s < shape.num_states(); ++s) {
      for (ActionId a = 0; a < shape.num_actions(s); ++a) {
        double total = 0.0;
        for (double p : row(s, a)) {
          if (p < 0.0) throw std::invalid_argument("TabularMdp: negative probability");
          total += p;
        }
        if (std::abs(total - 1.0) > 1e-12)
          throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
        if (!std::isfinite(reward(s, a)))
          throw std::invalid_argument("TabularMdp: non-finite reward");
      }
    }
  }
};

template <class E>
concept Environment = requires(const E& env, StateId s, ActionId a, Rng& rng) {
  { env.shape() } -> std::convertible_to<TableShape>;
  { env.discount() } -> std::convertible_to<double>;
  { env.reset() } -> std::same_as<StateId>;
  { env.step(s, a, rng) } -> std::same_as<TransitionOutcome>;
  { env.expected_mdp() } -> std::same_as<TabularMdp>;
  { env.name() } -> std::convertible_to<std::string>;
};

namespace detail {
inline void require_valid(const TableShape& shape, StateId s, ActionId a, const char* env) {
  if (!shape.valid(s, a))
    throw std::out_of_range(std::string(env) + ": invalid state/action (" +
                            std::to_string(s) + ", " + std::to_string(a) + ")");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Grid world
// ---------------------------------------------------------------------------

enum class GridReward { kHasselt, kWang };

/// 3x3 grid. Cells are numbered row-major from the bottom row, so the start
/// (lower-left) is 0 and the goal (upper-right) is 8. Any action taken at the
/// goal ends the episode; moves off the grid leave the agent in place.
///
///   Hasselt: -12 or +10 per non-terminal step, +5 at the terminating step.
///   Wang:    -1 per non-terminal step, -35 or +45 at the terminating step.
class GridWorld {
 public:
  static constexpr std::size_t kWidth = 3;
  static constexpr std::size_t kHeight = 3;
  static constexpr ActionId kUp = 0, kDown = 1, kLeft = 2, kRight = 3;
  static constexpr std::size_t kNumActions = 4;

  explicit GridWorld(GridReward reward = GridReward::kHasselt, double gamma = 0.95)
      : reward_(reward), gamma_(gamma) {}

  static constexpr StateId cell(std::size_t col, std::size_t row) { return row * kWidth + col; }
  static constexpr StateId start() { return cell(0, 0); }
  static constexpr StateId goal() { return cell(kWidth - 1, kHeight - 1); }

  GridReward reward_variant() const { return reward_; }
  std::string name() const { return reward_ == GridReward::kHasselt ? "grid-H" : "grid-W"; }
  TableShape shape() const { return TableShape::uniform(kWidth * kHeight, kNumActions); }
  double discount() const { return gamma_; }
  StateId reset() const { return start(); }

  /// Deterministic successor of a movement action.
  static StateId move(StateId s, ActionId a) {
    std::size_t col = s % kWidth, row = s / kWidth;
    switch (a) {
      case kUp: row = row + 1 < kHeight ? row + 1 : row; break;
      case kDown: row = row > 0 ? row - 1 : row; break;
      case kLeft: col = col > 0 ? col - 1 : col; break;
      case kRight: col = col + 1 < kWidth ? col + 1 : col; break;
      default: break;
    }
    return cell(col, row);
  }

  TransitionOutcome step(StateId s, ActionId a, Rng& rng) const {
    detail::require_valid(shape(), s, a, "grid");
    if (s == goal()) {
      if (reward_ == GridReward::kHasselt) return TransitionOutcome::end(5.0);
      return TransitionOutcome::end(rng.uniform_int(2) == 0 ? -35.0 : 45.0);
    }
    const StateId next = move(s, a);
    if (reward_ == GridReward::kHasselt)
      return TransitionOutcome::to(next, rng.uniform_int(2) == 0 ? -12.0 : 10.0);
    return TransitionOutcome::to(next, -1.0);
  }

  /// Both reward variants share the same expectations: -1 per step, +5 at the goal.
  TabularMdp expected_mdp() const {
    TabularMdp mdp(shape(), gamma_);
    for (StateId s = 0; s < kWidth * kHeight; ++s) {
      for (ActionId a = 0; a < kNumActions; ++a) {
        if (s == goal()) {
          mdp.row(s, a)[mdp.terminal_column()] = 1.0;
          mdp.reward(s, a) = 5.0;
        } else {
          mdp.row(s, a)[move(s, a)] = 1.0;
          mdp.reward(s, a) = -1.0;
        }
      }
    }
    return mdp;
  }

 private:
  GridReward reward_;
  double gamma_;
};

// ---------------------------------------------------------------------------
// Sutton's maximization-bias chain
// ---------------------------------------------------------------------------

/// States A (start) and B. At A, right ends the episode with reward 0 and left
/// moves to B with reward 0. Each of the K actions at B ends the episode with
/// reward ~ Normal(mu, 1).
class SuttonMdp {
 public:
  static constexpr StateId kA = 0, kB = 1;
  static constexpr ActionId kLeft = 0, kRight = 1;

  explicit SuttonMdp(std::size_t actions_at_b = 8, double mu = -0.1)
      : k_(actions_at_b), mu_(mu) {
    if (k_ == 0) throw std::invalid_argument("SuttonMdp: need at least one action at B");
  }

  std::size_t actions_at_b() const { return k_; }
  double mu() const { return mu_; }
  std::string name() const { return "sutton"; }
  TableShape shape() const { return TableShape({2, k_}); }
  double discount() const { return 1.0; }
  StateId reset() const { return kA; }

  TransitionOutcome step(StateId s, ActionId a, Rng& rng) const {
    detail::require_valid(shape(), s, a, "sutton");
    if (s == kA) return a == kRight ? TransitionOutcome::end(0.0) : TransitionOutcome::to(kB, 0.0);
    return TransitionOutcome::end(rng.normal(mu_, 1.0));
  }

  TabularMdp expected_mdp() const {
    TabularMdp mdp(shape(), 1.0);
    mdp.row(kA, kLeft)[kB] = 1.0;
    mdp.row(kA, kRight)[mdp.terminal_column()] = 1.0;
    for (ActionId a = 0; a < k_; ++a) {
      mdp.row(kB, a)[mdp.terminal_column()] = 1.0;
      mdp.reward(kB, a) = mu_;
    }
    return mdp;
  }

 private:
  std::size_t k_;
  double mu_;
};

// ---------------------------------------------------------------------------
// Weng's chain
// ---------------------------------------------------------------------------

/// States 0 (start) and 1..M, two actions everywhere. At 0, right ends the
/// episode and left jumps uniformly to one of 1..M, both with reward 0. At an
/// inner state, right returns to 0 and left ends the episode, both with
/// reward ~ Normal(-0.1, 1).
class WengMdp {
 public:
  static constexpr ActionId kLeft = 0, kRight = 1;
  static constexpr double kInnerMean = -0.1;

  explicit WengMdp(std::size_t inner_states = 8) : m_(inner_states) {
    if (m_ == 0) throw std::invalid_argument("WengMdp: need at least one inner state");
  }

  std::size_t inner_states() const { return m_; }
  std::string name() const { return "weng"; }
  TableShape shape() const { return TableShape::uniform(m_ + 1, 2); }
  double discount() const { return 1.0; }
  StateId reset() const { return 0; }

  TransitionOutcome step(StateId s, ActionId a, Rng& rng) const {
    detail::require_valid(shape(), s, a, "weng");
    if (s == 0) {
      if (a == kRight) return TransitionOutcome::end(0.0);
      return TransitionOutcome::to(1 + rng.uniform_int(m_), 0.0);
    }
    const double r = rng.normal(kInnerMean, 1.0);
    return a == kRight ? TransitionOutcome::to(0, r) : TransitionOutcome::end(r);
  }

  TabularMdp expected_mdp() const {
    TabularMdp mdp(shape(), 1.0);
    mdp.row(0, kRight)[mdp.terminal_column()] = 1.0;
    for (StateId s = 1; s <= m_; ++s) mdp.row(0, kLeft)[s] = 1.0 / static_cast<double>(m_);
    for (StateId s = 1; s <= m_; ++s) {
      mdp.row(s, kRight)[0] = 1.0;
      mdp.reward(s, kRight) = kInnerMean;
      mdp.row(s, kLeft)[mdp.terminal_column()] = 1.0;
      mdp.reward(s, kLeft) = kInnerMean;
    }
    return mdp;
  }

 private:
  std::size_t m_;
};

static_assert(Environment<GridWorld>);
static_assert(Environment<SuttonMdp>);
static_assert(Environment<WengMdp>);

using AnyEnvironment = std::variant<GridWorld, SuttonMdp, WengMdp>;

/// Environment selection as it appears in config files and on the command line.
struct EnvironmentSpec {
  std::string name = "grid";  // grid | sutton | weng
  GridReward reward = GridReward::kHasselt;
  std::size_t k = 8;
  double mu = -0.1;
  std::size_t m = 8;
  double gamma = 0.95;  // grid only; the chains are undiscounted
};

inline AnyEnvironment make_environment(const EnvironmentSpec& spec) {
  if (spec.name == "grid") return GridWorld(spec.reward, spec.gamma);
  if (spec.name == "sutton") return SuttonMdp(spec.k, spec.mu);
  if (spec.name == "weng") return WengMdp(spec.m);
  throw std::invalid_argument("unknown environment '" + spec.name +
                              "' (expected grid, sutton or weng)");
}

inline GridReward parse_grid_reward(const std::string& s) {
  if (s == "H" || s == "h" || s == "hasselt") return GridReward::kHasselt;
  if (s == "W" || s == "w" || s == "wang") return GridReward::kWang;
  throw std::invalid_argument("unknown grid reward variant '" + s + "' (expected H or W)");
}

}  // namespace daq
