#pragma once

// Tabular learners: Q-learning, double Q-learning, maxmin and minmax
// Q-learning, and dummy adversarial Q-learning (DAQ) in both target orders.
//
// All learners share one behaviour policy (epsilon-greedy over the sum of
// estimators) and one update entry point. A step of interaction consumes the
// random stream in this order:
//
//   act()            epsilon test, action draw
//   draw_estimator() estimator draw (async kinds only)
//   env.step()       transition draw, reward draw (when stochastic)
//   update()         double Q only: tie-break draw over argmax_a Q_i(s', a)

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "daq/core.hpp"

namespace daq {

enum class AgentKind { kQLearning, kDoubleQ, kMaxmin, kMinmax, kDaqMaxmin, kDaqMinmax };
enum class UpdateMode { kAsync, kSync };

inline std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kQLearning: return "q_learning";
    case AgentKind::kDoubleQ: return "double_q";
    case AgentKind::kMaxmin: return "maxmin";
    case AgentKind::kMinmax: return "minmax";
    case AgentKind::kDaqMaxmin: return "daq_maxmin";
    case AgentKind::kDaqMinmax: return "daq_minmax";
  }
  return "?";
}

inline AgentKind parse_agent_kind(const std::string& s) {
  for (auto k : {AgentKind::kQLearning, AgentKind::kDoubleQ, AgentKind::kMaxmin,
                 AgentKind::kMinmax, AgentKind::kDaqMaxmin, AgentKind::kDaqMinmax}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown agent kind '" + s + "'");
}

inline bool uses_maxmin_target(AgentKind kind) {
  return kind == AgentKind::kMaxmin || kind == AgentKind::kDaqMaxmin;
}
inline bool uses_minmax_target(AgentKind kind) {
  return kind == AgentKind::kMinmax || kind == AgentKind::kDaqMinmax;
}

struct ZeroInit {};
struct UniformInit {
  double lo = -1.0;
  double hi = 1.0;
};
using InitSpec = std::variant<ZeroInit, UniformInit>;

struct AgentConfig {
  AgentKind kind = AgentKind::kQLearning;
  std::size_t estimators = 1;
  std::vector<double> shifts{0.0};
  UpdateMode mode = UpdateMode::kAsync;
  StepSizeSchedule step_size = ConstantStep{0.1};
  ExplorationSchedule exploration = ConstantEpsilon{0.1};
  double gamma = 1.0;
  InitSpec init = ZeroInit{};
};

inline void validate(const AgentConfig& cfg) {
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument(to_string(cfg.kind) + ": " + why);
  };
  if (cfg.estimators == 0) fail("need at least one estimator");
  if (cfg.shifts.size() != cfg.estimators) fail("shift vector length must equal estimator count");
  for (double b : cfg.shifts)
    if (!std::isfinite(b)) fail("shifts must be finite");
  const bool zero_shifts =
      std::all_of(cfg.shifts.begin(), cfg.shifts.end(), [](double b) { return b == 0.0; });
  switch (cfg.kind) {
    case AgentKind::kQLearning:
      if (cfg.estimators != 1) fail("Q-learning uses exactly one estimator");
      if (!zero_shifts) fail("Q-learning takes no shifts");
      break;
    case AgentKind::kDoubleQ:
      if (cfg.estimators != 2) fail("double Q-learning uses exactly two estimators");
      if (!zero_shifts) fail("double Q-learning takes no shifts");
      if (cfg.mode != UpdateMode::kAsync) fail("double Q-learning is asynchronous only");
      break;
    case AgentKind::kMaxmin:
    case AgentKind::kMinmax:
      if (!zero_shifts) fail("shifts must be zero (use the DAQ kinds for shifted rewards)");
      break;
    case AgentKind::kDaqMaxmin:
    case AgentKind::kDaqMinmax:
      break;
  }
  if (cfg.mode == UpdateMode::kSync && cfg.estimators > 1 &&
      std::holds_alternative<ZeroInit>(cfg.init)) {
    const bool equal_shifts = std::all_of(cfg.shifts.begin(), cfg.shifts.end(),
                                          [&](double b) { return b == cfg.shifts.front(); });
    // Identical estimators stay identical forever under synchronous updates.
    if (equal_shifts) fail("synchronous mode needs random init or distinct shifts");
  }
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (auto* u = std::get_if<UniformInit>(&cfg.init); u && !(u->lo < u->hi))
    fail("uniform init needs lo < hi");
  validate(cfg.step_size);
  validate(cfg.exploration);
}

struct AgentState {
  MultiQ q;
  VisitCounters counters;
  std::uint64_t episode = 0;

  friend bool operator==(const AgentState&, const AgentState&) = default;
};

/// Fresh learner state. Uniform init draws every entry of Q_0, then Q_1, ...
/// in (s, a) layout order.
inline AgentState make_agent_state(const AgentConfig& cfg, const TableShape& shape, Rng& rng) {
  validate(cfg);
  AgentState st{MultiQ(shape, cfg.shifts), VisitCounters(shape, cfg.estimators), 0};
  if (auto* u = std::get_if<UniformInit>(&cfg.init)) {
    for (auto& table : st.q.tables)
      for (double& v : table.values()) v = u->lo + (u->hi - u->lo) * rng.uniform();
  }
  return st;
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

inline double max_value(const QTable& q, StateId s) {
  const auto r = q.row(s);
  return *std::max_element(r.begin(), r.end());
}

/// max_a min_j Q_j(s, a)
inline double maxmin_value(const MultiQ& mq, StateId s) {
  double best = -std::numeric_limits<double>::infinity();
  for (ActionId a = 0; a < mq.shape().num_actions(s); ++a) {
    double worst = mq.tables[0](s, a);
    for (std::size_t j = 1; j < mq.size(); ++j) worst = std::min(worst, mq.tables[j](s, a));
    best = std::max(best, worst);
  }
  return best;
}

/// min_j max_a Q_j(s, a)
inline double minmax_value(const MultiQ& mq, StateId s) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& table : mq.tables) worst = std::min(worst, max_value(table, s));
  return worst;
}

/// Bootstrap term of the TD target; `next` empty means Terminal. Double
/// Q-learning forms its own target in update_double_q.
inline double bootstrap(AgentKind kind, const MultiQ& mq, std::optional<StateId> next) {
  if (!next) return 0.0;
  if (kind == AgentKind::kQLearning) return max_value(mq.tables.front(), *next);
  if (uses_minmax_target(kind)) return minmax_value(mq, *next);
  if (uses_maxmin_target(kind)) return maxmin_value(mq, *next);
  throw std::invalid_argument("bootstrap: double Q-learning has no shared bootstrap");
}

inline std::optional<StateId> successor(const TransitionOutcome& out) {
  return out.terminal ? std::nullopt : std::optional<StateId>(out.next);
}

// ---------------------------------------------------------------------------
// Interaction
// ---------------------------------------------------------------------------

/// Counts the visit to s, then picks epsilon-greedily over sum_i Q_i(s, .).
inline ActionId act(const AgentConfig& cfg, AgentState& st, StateId s, Rng& rng) {
  st.counters.visit_state(s);
  const double eps = epsilon(cfg.exploration, st.counters, s);
  return select_action(st.q, s, eps, rng);
}

/// Estimator to update this step: one uniform draw over {0..N-1} for
/// asynchronous learners (Q-learning included), nothing for synchronous ones.
inline std::optional<EstimatorIndex> draw_estimator(const AgentConfig& cfg, Rng& rng) {
  if (cfg.mode == UpdateMode::kSync) return std::nullopt;
  return rng.uniform_int(cfg.estimators);
}

/// Double Q-learning step for the drawn estimator i (j is the other one).
inline void update_double_q(const AgentConfig& cfg, AgentState& st, StateId s, ActionId a,
                            const TransitionOutcome& out, EstimatorIndex i, Rng& rng) {
  if (st.q.size() != 2) throw std::invalid_argument("update_double_q: needs two estimators");
  const EstimatorIndex j = 1 - i;
  st.counters.visit_pair(i, s, a);
  const double alpha = step_size(cfg.step_size, st.counters, s, a, i, st.episode);
  double boot = 0.0;
  if (!out.terminal) {
    const auto selector = st.q.tables[i].row(out.next);
    const double best = *std::max_element(selector.begin(), selector.end());
    std::size_t ties = 0;
    for (double v : selector) ties += v == best;
    std::size_t k = rng.uniform_int(ties);
    ActionId chosen = 0;
    for (ActionId b = 0; b < selector.size(); ++b) {
      if (selector[b] == best && k-- == 0) {
        chosen = b;
        break;
      }
    }
    boot = st.q.tables[j](out.next, chosen);
  }
  double& q = st.q.tables[i](s, a);
  q += alpha * (out.reward + cfg.gamma * boot - q);
}

/**
 * Applies one learning step for the transition (s, a) -> out.
 *
 * Asynchronous kinds update only the estimator `drawn`; synchronous kinds
 * update every estimator in ascending order against a target computed once
 * from the tables as they were before this call. Each updated estimator's
 * (s, a) counter is incremented before its step size is read.
 */
inline void update(const AgentConfig& cfg, AgentState& st, StateId s, ActionId a,
                   const TransitionOutcome& out, std::optional<EstimatorIndex> drawn, Rng& rng) {
  if (cfg.kind == AgentKind::kDoubleQ) {
    if (!drawn) throw std::invalid_argument("double Q-learning needs a drawn estimator");
    update_double_q(cfg, st, s, a, out, *drawn, rng);
    return;
  }
  const double boot = bootstrap(cfg.kind, st.q, successor(out));
  auto apply = [&](EstimatorIndex i) {
    st.counters.visit_pair(i, s, a);
    const double alpha = step_size(cfg.step_size, st.counters, s, a, i, st.episode);
    double& q = st.q.tables[i](s, a);
    q += alpha * (out.reward + st.q.shifts[i] + cfg.gamma * boot - q);
  };
  if (cfg.mode == UpdateMode::kAsync) {
    if (!drawn) throw std::invalid_argument("asynchronous update needs a drawn estimator");
    apply(*drawn);
  } else {
    for (EstimatorIndex i = 0; i < st.q.size(); ++i) apply(i);
  }
}

/// Draws the estimator (if asynchronous) and applies the update.
inline void update(const AgentConfig& cfg, AgentState& st, StateId s, ActionId a,
                   const TransitionOutcome& out, Rng& rng) {
  update(cfg, st, s, a, out, draw_estimator(cfg, rng), rng);
}

/// Value-returning form of update(); the argument state is left untouched.
[[nodiscard]] inline AgentState updated(const AgentConfig& cfg, AgentState st, StateId s,
                                        ActionId a, const TransitionOutcome& out, Rng& rng) {
  update(cfg, st, s, a, out, rng);
  return st;
}

}  // namespace daq
