#pragma once

// Shared vocabulary for the tabular learners: index types, ragged Q tables,
// visit counters, step-size/exploration schedules, the deterministic random
// stream and the epsilon-greedy selector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace daq {

using StateId = std::size_t;
using ActionId = std::size_t;
using EstimatorIndex = std::size_t;

/// Result of one environment transition. `reward` is the raw environment
/// reward; reward shifts never appear here.
struct TransitionOutcome {
  StateId next = 0;
  bool terminal = false;
  double reward = 0.0;

  static TransitionOutcome to(StateId s, double r) { return {s, false, r}; }
  static TransitionOutcome end(double r) { return {0, true, r}; }
};

// ---------------------------------------------------------------------------
// Random stream
// ---------------------------------------------------------------------------

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the stream used by run `run` of agent label `label`:
/// splitmix64(splitmix64(splitmix64(base) ^ label) ^ run).
/// Adding labels or runs never perturbs the streams of existing ones.
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t label,
                                 std::uint64_t run) {
  return splitmix64(splitmix64(splitmix64(base) ^ label) ^ run);
}

/**
 * Deterministic pseudorandom stream.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the
 * standard. The std distributions are implementation-defined, so the
 * transforms are written out here:
 *
 *  - uniform():        top 53 bits of one word, scaled to [0, 1).
 *  - uniform_int(n):   Lemire's multiply-shift with rejection on [0, n);
 *                      usually one word, occasionally more on rejection.
 *  - normal():         Box-Muller cosine branch on two uniform() draws,
 *                      z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2). No caching,
 *                      so every normal() consumes exactly two uniforms.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::size_t uniform_int(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t bound = n;
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::size_t>(m >> 64);
  }

  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

/// Per-state action counts. Actions at a state are {0..num_actions(s)-1};
/// (s, a) pairs are laid out contiguously by state.
class TableShape {
 public:
  TableShape() = default;
  explicit TableShape(const std::vector<std::size_t>& actions_per_state) {
    offsets_.reserve(actions_per_state.size() + 1);
    offsets_.push_back(0);
    for (auto n : actions_per_state) {
      if (n == 0) throw std::invalid_argument("TableShape: state without actions");
      offsets_.push_back(offsets_.back() + n);
    }
  }
  static TableShape uniform(std::size_t states, std::size_t actions) {
    return TableShape(std::vector<std::size_t>(states, actions));
  }

  std::size_t num_states() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_actions(StateId s) const { return offsets_.at(s + 1) - offsets_[s]; }
  std::size_t max_actions() const {
    std::size_t m = 0;
    for (StateId s = 0; s < num_states(); ++s) m = std::max(m, num_actions(s));
    return m;
  }
  /// |S x A| counting only valid pairs.
  std::size_t size() const { return offsets_.empty() ? 0 : offsets_.back(); }
  std::size_t index(StateId s, ActionId a) const { return offsets_[s] + a; }
  bool valid(StateId s, ActionId a) const {
    return s < num_states() && a < num_actions(s);
  }

  friend bool operator==(const TableShape&, const TableShape&) = default;

 private:
  std::vector<std::size_t> offsets_;
};

class QTable {
 public:
  QTable() = default;
  explicit QTable(TableShape shape, double fill = 0.0)
      : shape_(std::move(shape)), values_(shape_.size(), fill) {}

  const TableShape& shape() const { return shape_; }
  double& operator()(StateId s, ActionId a) { return values_[shape_.index(s, a)]; }
  double operator()(StateId s, ActionId a) const { return values_[shape_.index(s, a)]; }

  std::span<double> row(StateId s) {
    return {values_.data() + shape_.index(s, 0), shape_.num_actions(s)};
  }
  std::span<const double> row(StateId s) const {
    return {values_.data() + shape_.index(s, 0), shape_.num_actions(s)};
  }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  TableShape shape_;
  std::vector<double> values_;
};

/// N estimators Q_0..Q_{N-1} and their reward shifts b_0..b_{N-1}.
struct MultiQ {
  std::vector<QTable> tables;
  std::vector<double> shifts;

  MultiQ() = default;
  MultiQ(const TableShape& shape, std::vector<double> b)
      : tables(b.size(), QTable(shape)), shifts(std::move(b)) {
    if (tables.empty()) throw std::invalid_argument("MultiQ: need at least one estimator");
  }

  std::size_t size() const { return tables.size(); }
  const TableShape& shape() const { return tables.front().shape(); }

  friend bool operator==(const MultiQ&, const MultiQ&) = default;
};

class VisitCounters {
 public:
  VisitCounters() = default;
  VisitCounters(const TableShape& shape, std::size_t estimators)
      : shape_(shape),
        n_state_(shape.num_states(), 0),
        n_sa_(estimators * shape.size(), 0) {}

  std::uint64_t state(StateId s) const { return n_state_[s]; }
  std::uint64_t pair(EstimatorIndex i, StateId s, ActionId a) const {
    return n_sa_[i * shape_.size() + shape_.index(s, a)];
  }
  std::uint64_t visit_state(StateId s) { return ++n_state_[s]; }
  std::uint64_t visit_pair(EstimatorIndex i, StateId s, ActionId a) {
    return ++n_sa_[i * shape_.size() + shape_.index(s, a)];
  }

  friend bool operator==(const VisitCounters&, const VisitCounters&) = default;

 private:
  TableShape shape_;
  std::vector<std::uint64_t> n_state_;
  std::vector<std::uint64_t> n_sa_;
};

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

struct ConstantStep {
  double alpha = 0.1;
};
/// alpha = 1 / n(s,a)^exponent, with n counting the current update.
struct VisitPolynomialStep {
  double exponent = 0.8;
};
/// alpha = scale / (episode + offset), episode 0-based.
struct EpisodeHarmonicStep {
  double scale = 10.0;
  double offset = 100.0;
};
using StepSizeSchedule = std::variant<ConstantStep, VisitPolynomialStep, EpisodeHarmonicStep>;

struct ConstantEpsilon {
  double epsilon = 0.1;
};
/// epsilon = 1 / sqrt(n(s)), with n counting the current visit.
struct CountBasedEpsilon {};
using ExplorationSchedule = std::variant<ConstantEpsilon, CountBasedEpsilon>;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline void validate(const StepSizeSchedule& schedule) {
  std::visit(overloaded{
                 [](const ConstantStep& c) {
                   if (!(c.alpha > 0.0 && c.alpha <= 1.0))
                     throw std::invalid_argument("constant step size must lie in (0, 1]");
                 },
                 [](const VisitPolynomialStep& p) {
                   if (!(p.exponent > 0.0))
                     throw std::invalid_argument("step-size exponent must be positive");
                 },
                 [](const EpisodeHarmonicStep& h) {
                   if (!(h.scale > 0.0 && h.offset >= h.scale))
                     throw std::invalid_argument("harmonic step size needs 0 < scale <= offset");
                 },
             },
             schedule);
}

inline void validate(const ExplorationSchedule& schedule) {
  if (auto* c = std::get_if<ConstantEpsilon>(&schedule)) {
    if (!(c->epsilon >= 0.0 && c->epsilon <= 1.0))
      throw std::invalid_argument("epsilon must lie in [0, 1]");
  }
}

/// Step size for one update of estimator i at (s, a). For VisitPolynomial the
/// counter must already include this update.
inline double step_size(const StepSizeSchedule& schedule, const VisitCounters& counters,
                        StateId s, ActionId a, EstimatorIndex i, std::uint64_t episode) {
  return std::visit(
      overloaded{
          [](const ConstantStep& c) { return c.alpha; },
          [&](const VisitPolynomialStep& p) {
            const auto n = static_cast<double>(counters.pair(i, s, a));
            return 1.0 / std::pow(n, p.exponent);
          },
          [&](const EpisodeHarmonicStep& h) {
            return h.scale / (static_cast<double>(episode) + h.offset);
          },
      },
      schedule);
}

inline double epsilon(const ExplorationSchedule& schedule, const VisitCounters& counters,
                      StateId s) {
  return std::visit(overloaded{
                        [](const ConstantEpsilon& c) { return c.epsilon; },
                        [&](const CountBasedEpsilon&) {
                          return 1.0 / std::sqrt(static_cast<double>(counters.state(s)));
                        },
                    },
                    schedule);
}

// ---------------------------------------------------------------------------
// Behaviour policy
// ---------------------------------------------------------------------------

/**
 * Epsilon-greedy choice over a row of action scores.
 *
 * Draw order is part of the contract: one uniform() for the epsilon test,
 * then exactly one uniform_int() — over all actions when exploring, over the
 * tie set of maximal scores otherwise. Ties are exact floating-point equality.
 */
inline ActionId select_action(std::span<const double> scores, double eps, Rng& rng) {
  const double u = rng.uniform();
  if (u < eps) return rng.uniform_int(scores.size());

  double best = scores[0];
  std::size_t ties = 1;
  for (std::size_t a = 1; a < scores.size(); ++a) {
    if (scores[a] > best) {
      best = scores[a];
      ties = 1;
    } else if (scores[a] == best) {
      ++ties;
    }
  }
  std::size_t k = rng.uniform_int(ties);
  for (std::size_t a = 0; a < scores.size(); ++a) {
    if (scores[a] == best && k-- == 0) return a;
  }
  return scores.size() - 1;  // unreachable
}

/// Sum of estimator rows at s, accumulated in ascending estimator order.
inline void summed_row(const MultiQ& mq, StateId s, std::vector<double>& out) {
  const auto first = mq.tables.front().row(s);
  out.assign(first.begin(), first.end());
  for (std::size_t i = 1; i < mq.size(); ++i) {
    const auto r = mq.tables[i].row(s);
    for (std::size_t a = 0; a < r.size(); ++a) out[a] += r[a];
  }
}

/// Epsilon-greedy over sum_i Q_i(s, .).
inline ActionId select_action(const MultiQ& mq, StateId s, double eps, Rng& rng) {
  thread_local std::vector<double> scores;
  summed_row(mq, s, scores);
  return select_action(std::span<const double>(scores), eps, rng);
}

}  // namespace daq
