#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <vector>

#include "daq/analysis.hpp"
#include "daq/envs.hpp"

namespace {

using namespace daq;

TEST(Reset, StartStates) {
  EXPECT_EQ(GridWorld().reset(), GridWorld::cell(0, 0));
  EXPECT_EQ(GridWorld().reset(), 0u);
  EXPECT_EQ(SuttonMdp().reset(), SuttonMdp::kA);
  EXPECT_EQ(WengMdp().reset(), 0u);
}

TEST(GridStep, GoalTerminatesWithFiveUnderHasselt) {
  GridWorld env(GridReward::kHasselt);
  Rng rng(1);
  for (ActionId a = 0; a < 4; ++a) {
    const auto out = env.step(GridWorld::goal(), a, rng);
    EXPECT_TRUE(out.terminal);
    EXPECT_EQ(out.reward, 5.0);
  }
}

TEST(GridStep, WangNonGoalStepCostsOne) {
  GridWorld env(GridReward::kWang);
  Rng rng(1);
  const auto out = env.step(GridWorld::cell(1, 1), GridWorld::kRight, rng);
  EXPECT_FALSE(out.terminal);
  EXPECT_EQ(out.next, GridWorld::cell(2, 1));
  EXPECT_EQ(out.reward, -1.0);
}

TEST(GridStep, MovesAndWalls) {
  EXPECT_EQ(GridWorld::move(0, GridWorld::kUp), 3u);
  EXPECT_EQ(GridWorld::move(0, GridWorld::kRight), 1u);
  EXPECT_EQ(GridWorld::move(0, GridWorld::kDown), 0u);
  EXPECT_EQ(GridWorld::move(0, GridWorld::kLeft), 0u);
  EXPECT_EQ(GridWorld::move(5, GridWorld::kRight), 5u);
  EXPECT_EQ(GridWorld::move(7, GridWorld::kUp), 7u);
}

TEST(GridStep, HasseltRewardsAndWangGoalTakeOnlyTwoValues) {
  Rng rng(2);
  GridWorld h(GridReward::kHasselt), w(GridReward::kWang);
  for (int k = 0; k < 1000; ++k) {
    const double r = h.step(4, k % 4, rng).reward;
    EXPECT_TRUE(r == -12.0 || r == 10.0);
    const double g = w.step(GridWorld::goal(), k % 4, rng).reward;
    EXPECT_TRUE(g == -35.0 || g == 45.0);
  }
}

TEST(SuttonStep, RightAtAEndsWithZero) {
  SuttonMdp env(8, -0.1);
  Rng rng(3);
  const auto out = env.step(SuttonMdp::kA, SuttonMdp::kRight, rng);
  EXPECT_TRUE(out.terminal);
  EXPECT_EQ(out.reward, 0.0);
  const auto left = env.step(SuttonMdp::kA, SuttonMdp::kLeft, rng);
  EXPECT_FALSE(left.terminal);
  EXPECT_EQ(left.next, SuttonMdp::kB);
  EXPECT_EQ(left.reward, 0.0);
  EXPECT_TRUE(env.step(SuttonMdp::kB, 7, rng).terminal);
}

TEST(WengStep, LeftAtZeroJumpsInside) {
  WengMdp env(8);
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    const auto out = env.step(0, WengMdp::kLeft, rng);
    EXPECT_FALSE(out.terminal);
    EXPECT_GE(out.next, 1u);
    EXPECT_LE(out.next, 8u);
    EXPECT_EQ(out.reward, 0.0);
  }
  EXPECT_TRUE(env.step(3, WengMdp::kLeft, rng).terminal);
  EXPECT_EQ(env.step(3, WengMdp::kRight, rng).next, 0u);
}

TEST(Step, InvalidPairsAreRejected) {
  Rng rng(5);
  EXPECT_THROW(GridWorld().step(9, 0, rng), std::out_of_range);
  EXPECT_THROW(GridWorld().step(0, 4, rng), std::out_of_range);
  EXPECT_THROW(SuttonMdp(8).step(SuttonMdp::kA, 2, rng), std::out_of_range);
  EXPECT_THROW(WengMdp(8).step(9, 0, rng), std::out_of_range);
}

TEST(ExpectedMdp, GridVariantsAgree) {
  const auto h = GridWorld(GridReward::kHasselt).expected_mdp();
  const auto w = GridWorld(GridReward::kWang).expected_mdp();
  EXPECT_EQ(h.transitions, w.transitions);
  EXPECT_EQ(h.rewards, w.rewards);
  EXPECT_EQ(h.reward(0, 0), -1.0);
  EXPECT_EQ(h.reward(GridWorld::goal(), 2), 5.0);
  EXPECT_NO_THROW(h.validate());
}

TEST(ExpectedMdp, SuttonRewardsAtB) {
  const auto mdp = SuttonMdp(8, -0.1).expected_mdp();
  for (ActionId a = 0; a < 8; ++a) EXPECT_EQ(mdp.reward(SuttonMdp::kB, a), -0.1);
  EXPECT_TRUE(mdp.terminates(SuttonMdp::kA, SuttonMdp::kRight));
  EXPECT_NO_THROW(mdp.validate());
}

TEST(ExpectedMdp, WengUniformJump) {
  const auto mdp = WengMdp(8).expected_mdp();
  for (StateId s = 1; s <= 8; ++s) EXPECT_EQ(mdp.row(0, WengMdp::kLeft)[s], 1.0 / 8.0);
  EXPECT_EQ(mdp.reward(5, WengMdp::kLeft), -0.1);
  EXPECT_NO_THROW(mdp.validate());
}

// Samples `per_pair` transitions from every (s, a) and compares frequencies and
// reward means with the expected model. Each comparison uses three standard
// errors of the sample estimate.
template <class Env>
void check_empirical(const Env& env, std::size_t total_steps, std::uint64_t seed) {
  const TabularMdp mdp = env.expected_mdp();
  const TableShape shape = env.shape();
  const std::size_t per_pair = total_steps / shape.size();
  const std::size_t width = mdp.row_width();
  Rng rng(seed);
  for (StateId s = 0; s < shape.num_states(); ++s) {
    for (ActionId a = 0; a < shape.num_actions(s); ++a) {
      std::vector<double> counts(width, 0.0);
      double sum = 0.0, sq = 0.0;
      for (std::size_t k = 0; k < per_pair; ++k) {
        const auto out = env.step(s, a, rng);
        counts[out.terminal ? mdp.terminal_column() : out.next] += 1.0;
        sum += out.reward;
        sq += out.reward * out.reward;
      }
      const double n = static_cast<double>(per_pair);
      for (std::size_t t = 0; t < width; ++t) {
        const double p = mdp.row(s, a)[t];
        const double freq = counts[t] / n;
        const double se = std::sqrt(p * (1.0 - p) / n);
        if (se == 0.0) {
          EXPECT_EQ(freq, p) << env.name() << " s=" << s << " a=" << a << " t=" << t;
        } else {
          EXPECT_LE(std::abs(freq - p), 3.0 * se)
              << env.name() << " s=" << s << " a=" << a << " t=" << t;
        }
      }
      const double mean = sum / n;
      const double var = std::max(0.0, sq / n - mean * mean);
      const double se = std::sqrt(var / n);
      if (se == 0.0) {
        EXPECT_EQ(mean, mdp.reward(s, a)) << env.name() << " s=" << s << " a=" << a;
      } else {
        EXPECT_LE(std::abs(mean - mdp.reward(s, a)), 3.0 * se)
            << env.name() << " s=" << s << " a=" << a;
      }
    }
  }
}

TEST(EmpiricalStatistics, GridHasselt) { check_empirical(GridWorld(GridReward::kHasselt), 1'000'000, 21); }
TEST(EmpiricalStatistics, GridWang) { check_empirical(GridWorld(GridReward::kWang), 1'000'000, 22); }
TEST(EmpiricalStatistics, SuttonNegative) { check_empirical(SuttonMdp(8, -0.1), 1'000'000, 23); }
TEST(EmpiricalStatistics, SuttonPositive) { check_empirical(SuttonMdp(8, 0.1), 1'000'000, 24); }
TEST(EmpiricalStatistics, Weng) { check_empirical(WengMdp(8), 1'000'000, 25); }

// Greedy rollouts under the oracle's optimal policy: exactly five actions and
// +0.2 reward per step on average.
void check_greedy_rollouts(GridReward variant, std::uint64_t seed) {
  const GridWorld env(variant);
  const auto oracle = value_iteration(env.expected_mdp());
  Rng rng(seed);
  const int episodes = 1'000'000;
  double per_step = 0.0;
  for (int e = 0; e < episodes; ++e) {
    StateId s = env.reset();
    double total = 0.0;
    int length = 0;
    for (;;) {
      const auto& best = oracle.policy[s];
      const ActionId a = best[rng.uniform_int(best.size())];
      const auto out = env.step(s, a, rng);
      total += out.reward;
      ++length;
      if (out.terminal) break;
      ASSERT_LT(length, 5);
      s = out.next;
    }
    ASSERT_EQ(length, 5);
    per_step += total / length;
  }
  EXPECT_NEAR(per_step / episodes, 0.2, 0.02);
}

TEST(GridOptimalPolicy, HasseltFiveStepsAtPointTwo) { check_greedy_rollouts(GridReward::kHasselt, 31); }
TEST(GridOptimalPolicy, WangFiveStepsAtPointTwo) { check_greedy_rollouts(GridReward::kWang, 32); }

TEST(Factory, MakesEachEnvironment) {
  EnvironmentSpec spec;
  spec.name = "sutton";
  spec.k = 4;
  const auto env = make_environment(spec);
  ASSERT_TRUE(std::holds_alternative<SuttonMdp>(env));
  EXPECT_EQ(std::get<SuttonMdp>(env).actions_at_b(), 4u);
  spec.name = "nowhere";
  EXPECT_THROW(make_environment(spec), std::invalid_argument);
  EXPECT_EQ(parse_grid_reward("W"), GridReward::kWang);
  EXPECT_THROW(parse_grid_reward("X"), std::invalid_argument);
}

}  // namespace
