#pragma once

// The dummy-adversary construction. An MDP plus shift vector b becomes an
// alternating zero-sum Markov game: the user picks a, the adversary picks an
// index i in {0..N-1} whose only effect is to add b_i to the reward. Minimax
// Q-learning on this game reproduces asynchronous DAQ step for step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "daq/agents.hpp"
#include "daq/analysis.hpp"
#include "daq/core.hpp"
#include "daq/envs.hpp"

namespace daq {

enum class TargetOrder { kMaxmin, kMinmax };

inline TargetOrder parse_target_order(const std::string& s) {
  if (s == "maxmin") return TargetOrder::kMaxmin;
  if (s == "minmax") return TargetOrder::kMinmax;
  throw std::invalid_argument("unknown target order '" + s + "' (expected maxmin or minmax)");
}

struct GameOutcome {
  TransitionOutcome base;  // environment transition, raw reward
  double reward = 0.0;     // r + b_i
};

template <Environment Env>
class AugmentedGame {
 public:
  AugmentedGame(Env base, std::vector<double> shifts)
      : base_(std::move(base)), shifts_(std::move(shifts)) {
    if (shifts_.empty()) throw std::invalid_argument("AugmentedGame: adversary needs an action");
  }

  const Env& base() const { return base_; }
  const std::vector<double>& shifts() const { return shifts_; }
  std::size_t adversary_actions() const { return shifts_.size(); }
  TableShape shape() const { return base_.shape(); }
  double discount() const { return base_.discount(); }
  StateId reset() const { return base_.reset(); }

  double reward(double env_reward, EstimatorIndex i) const { return env_reward + shifts_.at(i); }

  /// The adversary's action never reaches the dynamics: the base environment
  /// is stepped exactly as it would be without it.
  GameOutcome step(StateId s, ActionId a, EstimatorIndex i, Rng& rng) const {
    const TransitionOutcome out = base_.step(s, a, rng);
    return {out, reward(out.reward, i)};
  }

  /// Transition probabilities for adversary action i; identical for every i.
  TabularMdp kernel(EstimatorIndex i) const {
    TabularMdp mdp = base_.expected_mdp();
    for (double& r : mdp.rewards) r = reward(r, i);
    return mdp;
  }

 private:
  Env base_;
  std::vector<double> shifts_;
};

template <Environment Env>
AugmentedGame<Env> build_augmented_game(Env env, std::vector<double> shifts) {
  return AugmentedGame<Env>(std::move(env), std::move(shifts));
}

/// Q(s, a, i) over user actions a and adversary actions i.
class GameQ {
 public:
  GameQ() = default;
  GameQ(TableShape shape, std::size_t adversary, double fill = 0.0)
      : shape_(std::move(shape)), adversary_(adversary), values_(shape_.size() * adversary, fill) {}

  const TableShape& shape() const { return shape_; }
  std::size_t adversary_actions() const { return adversary_; }
  double& operator()(StateId s, ActionId a, EstimatorIndex i) {
    return values_[shape_.index(s, a) * adversary_ + i];
  }
  double operator()(StateId s, ActionId a, EstimatorIndex i) const {
    return values_[shape_.index(s, a) * adversary_ + i];
  }

  /// max_a min_i Q(s, a, i): the adversary answers after seeing a.
  double maxmin(StateId s) const {
    double best = -std::numeric_limits<double>::infinity();
    for (ActionId a = 0; a < shape_.num_actions(s); ++a) {
      double worst = (*this)(s, a, 0);
      for (EstimatorIndex i = 1; i < adversary_; ++i) worst = std::min(worst, (*this)(s, a, i));
      best = std::max(best, worst);
    }
    return best;
  }

  /// min_i max_a Q(s, a, i): the user answers after seeing i.
  double minmax(StateId s) const {
    double worst = std::numeric_limits<double>::infinity();
    for (EstimatorIndex i = 0; i < adversary_; ++i) {
      double best = (*this)(s, 0, i);
      for (ActionId a = 1; a < shape_.num_actions(s); ++a) best = std::max(best, (*this)(s, a, i));
      worst = std::min(worst, best);
    }
    return worst;
  }

  double value(StateId s, TargetOrder order) const {
    return order == TargetOrder::kMaxmin ? maxmin(s) : minmax(s);
  }

 private:
  TableShape shape_;
  std::size_t adversary_ = 1;
  std::vector<double> values_;
};

/// Q(s,a,i) += alpha * (reward + gamma * T - Q(s,a,i)), T the game value of
/// the successor in the given order (0 at Terminal). `reward` is the
/// augmented reward r + b_i.
inline void minimax_q_update(GameQ& gq, StateId s, ActionId a, EstimatorIndex i,
                             const TransitionOutcome& next, double reward, double alpha,
                             double gamma, TargetOrder order) {
  const double t = next.terminal ? 0.0 : gq.value(next.next, order);
  double& q = gq(s, a, i);
  q += alpha * (reward + gamma * t - q);
}

// ---------------------------------------------------------------------------
// Minimax Q-learner on the augmented game
// ---------------------------------------------------------------------------

/// Learner state for minimax Q-learning. The user follows epsilon-greedy over
/// sum_i Q(s, a, i); the adversary's behaviour policy is uniform.
struct GameLearner {
  GameQ q;
  VisitCounters counters;  // n(s), and n_i(s, a) per adversary action
  std::uint64_t episode = 0;
};

inline GameLearner make_game_learner(const TableShape& shape, std::size_t adversary,
                                     const InitSpec& init, Rng& rng) {
  GameLearner g{GameQ(shape, adversary), VisitCounters(shape, adversary), 0};
  if (auto* u = std::get_if<UniformInit>(&init)) {
    // Same draw order as make_agent_state: adversary-major, then (s, a).
    for (EstimatorIndex i = 0; i < adversary; ++i)
      for (StateId s = 0; s < shape.num_states(); ++s)
        for (ActionId a = 0; a < shape.num_actions(s); ++a)
          g.q(s, a, i) = u->lo + (u->hi - u->lo) * rng.uniform();
  }
  return g;
}

inline ActionId game_user_action(GameLearner& g, const ExplorationSchedule& exploration,
                                 StateId s, Rng& rng) {
  g.counters.visit_state(s);
  const double eps = epsilon(exploration, g.counters, s);
  const std::size_t na = g.q.shape().num_actions(s);
  std::vector<double> scores(na, 0.0);
  for (ActionId a = 0; a < na; ++a) {
    scores[a] = g.q(s, a, 0);
    for (EstimatorIndex i = 1; i < g.q.adversary_actions(); ++i) scores[a] += g.q(s, a, i);
  }
  return select_action(std::span<const double>(scores), eps, rng);
}

inline EstimatorIndex game_adversary_action(const GameLearner& g, Rng& rng) {
  return rng.uniform_int(g.q.adversary_actions());
}

// ---------------------------------------------------------------------------
// Equivalence harness
// ---------------------------------------------------------------------------

struct Divergence {
  std::uint64_t step = 0;
  StateId s = 0;
  ActionId a = 0;
  EstimatorIndex i = 0;
  double daq_value = 0.0;
  double game_value = 0.0;
};

struct EquivalenceReport {
  std::uint64_t steps = 0;
  std::uint64_t episodes = 0;
  double max_deviation = 0.0;
  std::optional<Divergence> first_divergence;

  bool exact() const { return max_deviation == 0.0 && !first_divergence; }

  std::string describe() const {
    std::ostringstream os;
    os << "steps: " << steps << "\nepisodes: " << episodes
       << "\nmax deviation: " << max_deviation << "\n";
    if (first_divergence) {
      const auto& d = *first_divergence;
      os << "first divergence: step " << d.step << " cell (s=" << d.s << ", a=" << d.a
         << ", i=" << d.i << ") daq=" << d.daq_value << " game=" << d.game_value << "\n";
    }
    return os.str();
  }
};

inline TargetOrder target_order(AgentKind kind) {
  if (uses_maxmin_target(kind)) return TargetOrder::kMaxmin;
  if (uses_minmax_target(kind)) return TargetOrder::kMinmax;
  if (kind == AgentKind::kQLearning) return TargetOrder::kMaxmin;  // singleton adversary
  throw std::invalid_argument("double Q-learning has no game counterpart");
}

/**
 * Runs asynchronous DAQ and minimax Q-learning on the augmented game side by
 * side from the same seed for `steps` transitions, comparing every table
 * entry after every update.
 *
 * Both sides consume their own stream in the same order: epsilon test,
 * action, estimator/adversary, transition, reward.
 */
template <Environment Env>
EquivalenceReport verify_equivalence(const Env& env, const AgentConfig& cfg, std::uint64_t steps,
                                     std::uint64_t seed,
                                     std::uint64_t max_steps_per_episode = 100'000) {
  if (cfg.mode != UpdateMode::kAsync)
    throw std::invalid_argument("verify_equivalence: needs an asynchronous configuration");
  if (cfg.kind == AgentKind::kDoubleQ)
    throw std::invalid_argument("verify_equivalence: double Q-learning has no game counterpart");
  const TargetOrder order = target_order(cfg.kind);
  const auto game = build_augmented_game(env, cfg.shifts);
  const TableShape shape = env.shape();

  Rng daq_rng(seed), game_rng(seed);
  AgentState daq = make_agent_state(cfg, shape, daq_rng);
  GameLearner learner = make_game_learner(shape, game.adversary_actions(), cfg.init, game_rng);

  EquivalenceReport rep;
  StateId s_daq = env.reset(), s_game = game.reset();
  std::uint64_t in_episode = 0;
  for (std::uint64_t t = 1; t <= steps; ++t) {
    const ActionId a = act(cfg, daq, s_daq, daq_rng);
    const auto i = draw_estimator(cfg, daq_rng);
    const TransitionOutcome out = env.step(s_daq, a, daq_rng);
    update(cfg, daq, s_daq, a, out, i, daq_rng);

    const ActionId ga = game_user_action(learner, cfg.exploration, s_game, game_rng);
    const EstimatorIndex gi = game_adversary_action(learner, game_rng);
    const GameOutcome gout = game.step(s_game, ga, gi, game_rng);
    learner.counters.visit_pair(gi, s_game, ga);
    const double alpha = step_size(cfg.step_size, learner.counters, s_game, ga, gi, learner.episode);
    minimax_q_update(learner.q, s_game, ga, gi, gout.base, gout.reward, alpha, cfg.gamma, order);

    rep.steps = t;
    for (EstimatorIndex k = 0; k < cfg.estimators; ++k) {
      for (StateId s = 0; s < shape.num_states(); ++s) {
        for (ActionId b = 0; b < shape.num_actions(s); ++b) {
          const double x = daq.q.tables[k](s, b), y = learner.q(s, b, k);
          const double dev = std::abs(x - y);
          if (dev != 0.0 || (x != y)) {
            rep.max_deviation = std::max(rep.max_deviation, std::isnan(dev) ? INFINITY : dev);
            if (!rep.first_divergence) rep.first_divergence = Divergence{t, s, b, k, x, y};
          }
        }
      }
    }
    if (!rep.first_divergence && (a != ga || i.value_or(0) != gi))
      rep.first_divergence = Divergence{t, s_daq, a, i.value_or(0), 0.0, 0.0};

    ++in_episode;
    const bool end_daq = out.terminal || in_episode >= max_steps_per_episode;
    const bool end_game = gout.base.terminal || in_episode >= max_steps_per_episode;
    if (end_daq) {
      ++daq.episode;
      s_daq = env.reset();
    } else {
      s_daq = out.next;
    }
    if (end_game) {
      ++learner.episode;
      s_game = game.reset();
    } else {
      s_game = gout.base.next;
    }
    if (end_daq) {
      ++rep.episodes;
      in_episode = 0;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Game oracle
// ---------------------------------------------------------------------------

/**
 * Value iteration for the expected augmented game:
 *
 *   Q(s,a,i) = R(s,a) + b_i + gamma * (sum_s' P(s,a,s') V(s') + P(s,a,T) V_T)
 *
 * with V the game value in the given order. Terminal is absorbing and the
 * adversary keeps picking the smallest shift there, V_T = min_i b_i/(1-gamma).
 */
inline GameQ game_value_iteration(const TabularMdp& mdp, const std::vector<double>& shifts,
                                  TargetOrder order, double tol = 1e-12,
                                  std::size_t max_iter = 1'000'000) {
  mdp.validate();
  if (shifts.empty()) throw std::invalid_argument("game_value_iteration: no adversary actions");
  const double gamma = mdp.discount;
  const double lowest = *std::min_element(shifts.begin(), shifts.end());
  if (gamma >= 1.0 && std::any_of(shifts.begin(), shifts.end(), [](double b) { return b != 0.0; }))
    throw std::invalid_argument("game_value_iteration: nonzero shifts need gamma < 1");
  const double terminal_value = gamma < 1.0 ? lowest / (1.0 - gamma) : 0.0;
  const std::size_t n = mdp.shape.num_states();

  GameQ q(mdp.shape, shifts.size()), next(mdp.shape, shifts.size());
  std::vector<double> v(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (StateId s = 0; s < n; ++s) v[s] = q.value(s, order);
    double delta = 0.0;
    for (StateId s = 0; s < n; ++s) {
      for (ActionId a = 0; a < mdp.shape.num_actions(s); ++a) {
        const auto row = mdp.row(s, a);
        double expect = row[mdp.terminal_column()] * terminal_value;
        for (StateId t = 0; t < n; ++t)
          if (row[t] != 0.0) expect += row[t] * v[t];
        for (EstimatorIndex i = 0; i < shifts.size(); ++i) {
          next(s, a, i) = mdp.reward(s, a) + shifts[i] + gamma * expect;
          delta = std::max(delta, std::abs(next(s, a, i) - q(s, a, i)));
        }
      }
    }
    std::swap(q, next);
    if (delta <= tol) return q;
  }
  throw ConvergenceError("game_value_iteration: no convergence", INFINITY);
}

/// Per-state argmax_a min_i Q(s, a, i), within tolerance `tol`.
inline GreedySets user_greedy_sets(const GameQ& q, double tol = 0.0) {
  QTable worst(q.shape());
  for (StateId s = 0; s < q.shape().num_states(); ++s) {
    for (ActionId a = 0; a < q.shape().num_actions(s); ++a) {
      double w = q(s, a, 0);
      for (EstimatorIndex i = 1; i < q.adversary_actions(); ++i) w = std::min(w, q(s, a, i));
      worst(s, a) = w;
    }
  }
  return greedy_policy(worst, tol);
}

}  // namespace daq
