#pragma once

// Ground truth for the learners: value iteration on explicit MDPs, greedy
// argmax sets, the reward-shift offset check, and the finite-time error bound
// of asynchronous DAQ with constant step size.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "daq/core.hpp"
#include "daq/envs.hpp"

namespace daq {

/// Per-state argmax sets.
using GreedySets = std::vector<std::vector<ActionId>>;

/// Every action whose value is within `tol` of the row maximum. With tol = 0
/// the sets are exact ties.
inline GreedySets greedy_policy(const QTable& q, double tol = 0.0) {
  GreedySets sets(q.shape().num_states());
  for (StateId s = 0; s < sets.size(); ++s) {
    const auto r = q.row(s);
    const double best = *std::max_element(r.begin(), r.end());
    for (ActionId a = 0; a < r.size(); ++a)
      if (r[a] >= best - tol) sets[s].push_back(a);
  }
  return sets;
}

struct OracleResult {
  QTable qstar;
  GreedySets policy;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<double> residuals;  // sup-norm change per sweep
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// True when Terminal is reachable from every state through some chain of
/// positive-probability transitions.
inline bool terminal_reachable_everywhere(const TabularMdp& mdp) {
  const std::size_t n = mdp.shape.num_states();
  std::vector<bool> reaches(n, false);
  for (bool changed = true; changed;) {
    changed = false;
    for (StateId s = 0; s < n; ++s) {
      if (reaches[s]) continue;
      for (ActionId a = 0; a < mdp.shape.num_actions(s) && !reaches[s]; ++a) {
        const auto row = mdp.row(s, a);
        if (row[mdp.terminal_column()] > 0.0) reaches[s] = true;
        for (StateId t = 0; t < n && !reaches[s]; ++t)
          if (row[t] > 0.0 && reaches[t]) reaches[s] = true;
      }
      changed = changed || reaches[s];
    }
  }
  return std::all_of(reaches.begin(), reaches.end(), [](bool b) { return b; });
}

/**
 * Jacobi value iteration for the shifted Bellman optimality equation
 *
 *   Q(s,a) = R(s,a) + shift + gamma * (sum_s' P(s,a,s') max_a' Q(s',a')
 *                                      + P(s,a,Terminal) * V_T),
 *
 * where Terminal is absorbing and keeps collecting the shift,
 * V_T = shift / (1 - gamma). With shift 0 Terminal contributes 0.
 *
 * gamma = 1 is accepted only for unshifted MDPs whose Terminal is reachable
 * from every state (the episodic chains).
 */
inline OracleResult value_iteration(const TabularMdp& mdp, double shift = 0.0,
                                    double tol = 1e-10, std::size_t max_iter = 1'000'000) {
  mdp.validate();
  const double gamma = mdp.discount;
  if (gamma >= 1.0) {
    if (shift != 0.0)
      throw std::invalid_argument("value_iteration: a nonzero shift needs gamma < 1");
    if (!terminal_reachable_everywhere(mdp))
      throw std::invalid_argument("value_iteration: gamma = 1 on a non-episodic MDP");
  }
  const double terminal_value = gamma < 1.0 ? shift / (1.0 - gamma) : 0.0;
  const std::size_t n = mdp.shape.num_states();

  OracleResult result{QTable(mdp.shape), {}, 0, std::numeric_limits<double>::infinity(), {}};
  QTable next(mdp.shape);
  std::vector<double> v(n, 0.0);
  while (result.iterations < max_iter) {
    for (StateId s = 0; s < n; ++s) v[s] = *std::max_element(result.qstar.row(s).begin(),
                                                              result.qstar.row(s).end());
    double delta = 0.0;
    for (StateId s = 0; s < n; ++s) {
      for (ActionId a = 0; a < mdp.shape.num_actions(s); ++a) {
        const auto row = mdp.row(s, a);
        double expect = row[mdp.terminal_column()] * terminal_value;
        for (StateId t = 0; t < n; ++t)
          if (row[t] != 0.0) expect += row[t] * v[t];
        next(s, a) = mdp.reward(s, a) + shift + gamma * expect;
        delta = std::max(delta, std::abs(next(s, a) - result.qstar(s, a)));
      }
    }
    std::swap(result.qstar, next);
    ++result.iterations;
    result.residual = delta;
    result.residuals.push_back(delta);
    if (delta <= tol) {
      result.policy = greedy_policy(result.qstar);
      return result;
    }
  }
  throw ConvergenceError("value_iteration: no convergence after " +
                             std::to_string(max_iter) + " sweeps (residual " +
                             std::to_string(result.residual) + ")",
                         result.residual);
}

struct ShiftBiasReport {
  double expected_offset = 0.0;  // b / (1 - gamma)
  double max_error = 0.0;        // max |Q*_b - Q* - b/(1-gamma)|
  bool policies_match = false;
  bool passed = false;
};

/// Compares the optimal values with and without a constant reward shift b.
/// Argmax sets are compared with tolerance `tol`, since both tables carry
/// rounding of order tol.
inline ShiftBiasReport shift_bias_check(const TabularMdp& mdp, double b, double tol = 1e-8) {
  if (!(mdp.discount < 1.0)) throw std::invalid_argument("shift_bias_check: needs gamma < 1");
  const double vi_tol = std::min(1e-12, tol * 1e-2);
  const auto base = value_iteration(mdp, 0.0, vi_tol);
  const auto shifted = value_iteration(mdp, b, vi_tol);
  ShiftBiasReport rep;
  rep.expected_offset = b / (1.0 - mdp.discount);
  const auto q0 = base.qstar.values();
  const auto qb = shifted.qstar.values();
  for (std::size_t k = 0; k < q0.size(); ++k)
    rep.max_error = std::max(rep.max_error, std::abs(qb[k] - q0[k] - rep.expected_offset));
  rep.policies_match = greedy_policy(base.qstar, tol) == greedy_policy(shifted.qstar, tol);
  rep.passed = rep.max_error <= tol && rep.policies_match;
  return rep;
}

// ---------------------------------------------------------------------------
// Finite-time bound
// ---------------------------------------------------------------------------

struct BoundParams {
  double alpha = 0.1;
  double gamma = 0.95;
  double estimators = 1;  // N
  double size_sa = 1;     // |S x A|
  double d_min = 0.01;
  double d_max = 0.01;
  double t = 0;
};

struct BoundTerms {
  double constant = 0.0;   // step-size bias, independent of t
  double geometric = 0.0;  // decays like rho^t
  double transient = 0.0;  // decays like rho^(t/2 - 1)
  double total = 0.0;
};

/// rho = 1 - alpha * d_min * (1 - gamma). Throws unless every parameter is in
/// range and rho lies strictly inside (0, 1).
inline double rho(const BoundParams& p) {
  auto bad = [](const std::string& why) { throw std::invalid_argument("bound: " + why); };
  if (!(p.alpha > 0.0 && p.alpha <= 1.0)) bad("alpha must lie in (0, 1]");
  if (!(p.gamma >= 0.0 && p.gamma < 1.0)) bad("gamma must lie in [0, 1)");
  if (!(p.estimators >= 1.0)) bad("N must be at least 1");
  if (!(p.size_sa >= 1.0)) bad("|S x A| must be at least 1");
  if (!(p.d_min > 0.0 && p.d_min <= 1.0)) bad("d_min must lie in (0, 1]");
  if (!(p.d_max > 0.0 && p.d_max <= 1.0)) bad("d_max must lie in (0, 1]");
  if (!(p.d_min <= p.d_max)) bad("d_min must not exceed d_max");
  if (!(p.t >= 0.0)) bad("t must be nonnegative");
  const double r = 1.0 - p.alpha * p.d_min * (1.0 - p.gamma);
  if (!(r > 0.0 && r < 1.0)) bad("rho = " + std::to_string(r) + " is outside (0, 1)");
  return r;
}

inline BoundTerms theorem1_bound(const BoundParams& p) {
  const double r = rho(p);
  const double one_minus_gamma = 1.0 - p.gamma;
  BoundTerms b;
  b.constant = 27.0 * p.d_max * p.size_sa * p.estimators * std::sqrt(p.alpha) /
               (std::pow(p.d_min, 1.5) * std::pow(one_minus_gamma, 2.5));
  b.geometric = 6.0 * std::pow(p.size_sa, 1.5) * std::pow(p.estimators, 1.5) /
                one_minus_gamma * std::pow(r, p.t);
  b.transient = 24.0 * p.gamma * p.d_max * std::pow(p.size_sa, 2.0 / 3.0) *
                std::pow(p.estimators, 2.0 / 3.0) / one_minus_gamma *
                (3.0 / (p.d_min * one_minus_gamma)) * std::pow(r, p.t / 2.0 - 1.0);
  b.total = b.constant + b.geometric + b.transient;
  return b;
}

struct SamplingExtremes {
  double d_min = 0.0;
  double d_max = 0.0;
};

/// Extremes of d(s,a) * mu(i) over S x A x {estimators}: the asynchronous case.
inline SamplingExtremes async_extremes(std::span<const double> d_sa,
                                       std::span<const double> mu) {
  const auto [dlo, dhi] = std::minmax_element(d_sa.begin(), d_sa.end());
  const auto [mlo, mhi] = std::minmax_element(mu.begin(), mu.end());
  return {*dlo * *mlo, *dhi * *mhi};
}

/// Extremes of d(s,a) over S x A: every estimator is updated each step.
inline SamplingExtremes sync_extremes(std::span<const double> d_sa) {
  const auto [dlo, dhi] = std::minmax_element(d_sa.begin(), d_sa.end());
  return {*dlo, *dhi};
}

inline BoundParams with_extremes(BoundParams p, SamplingExtremes e) {
  p.d_min = e.d_min;
  p.d_max = e.d_max;
  return p;
}

}  // namespace daq
