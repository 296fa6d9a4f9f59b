#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "daq/daq.hpp"

namespace {

using namespace daq;
namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("daq_harness_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

const char* kSmallSutton = R"(
env.name = sutton
env.k = 8
env.mu = -0.1
episodes = 60
runs = 9
seed = 3
metric = start_action_ratio
metric.action = 0
agent.1.label = q
agent.1.kind = q_learning
agent.2.label = dq
agent.2.kind = double_q
agent.3.label = daq
agent.3.kind = daq_maxmin
agent.3.shifts = -1,-2
)";

TEST(MovingAverage, Examples) {
  EXPECT_EQ(moving_average({0.0, 1.0}, 2), (std::vector<double>{0.0, 0.5}));
  const std::vector<double> xs{3.0, -1.0, 4.0, 1.5};
  EXPECT_EQ(moving_average(xs, 1), xs);
  EXPECT_EQ(moving_average({2.0, 2.0, 2.0, 2.0}, 3), (std::vector<double>{2.0, 2.0, 2.0, 2.0}));
  EXPECT_EQ(moving_average({1.0, 2.0, 3.0, 4.0}, 2), (std::vector<double>{1.0, 1.5, 2.5, 3.5}));
  EXPECT_THROW(moving_average(xs, 0), std::invalid_argument);
}

TEST(RunEpisode, GreedyGridAgentTakesFiveSteps) {
  // An agent whose tables hold the optimal values behaves greedily on the
  // grid once exploration is off.
  const GridWorld env;
  const auto oracle = value_iteration(env.expected_mdp());
  AgentConfig cfg;
  cfg.gamma = 0.95;
  cfg.exploration = ConstantEpsilon{0.0};
  cfg.step_size = ConstantStep{1e-9};
  Rng rng(5);
  AgentState st = make_agent_state(cfg, env.shape(), rng);
  st.q.tables[0] = oracle.qstar;
  const auto ep = run_episode(cfg, st, env, rng, 1000);
  EXPECT_EQ(ep.length, 5u);
  EXPECT_FALSE(ep.truncated);
  EXPECT_EQ(st.episode, 1u);
}

TEST(RunEpisode, TruncationAtTheCap) {
  const GridWorld env;
  AgentConfig cfg;
  cfg.gamma = 0.95;
  Rng rng(6);
  AgentState st = make_agent_state(cfg, env.shape(), rng);
  const auto ep = run_episode(cfg, st, env, rng, 1);
  EXPECT_EQ(ep.length, 1u);
  EXPECT_TRUE(ep.truncated);
}

TEST(RunEpisode, SuttonFirstActionIsTakenAtA) {
  const SuttonMdp env(8, -0.1);
  AgentConfig cfg;
  Rng rng(7);
  AgentState st = make_agent_state(cfg, env.shape(), rng);
  for (int e = 0; e < 200; ++e) {
    const auto ep = run_episode(cfg, st, env, rng, 100);
    EXPECT_EQ(ep.length, ep.first_action == SuttonMdp::kLeft ? 2u : 1u);
    EXPECT_EQ(st.counters.state(SuttonMdp::kA), static_cast<std::uint64_t>(e + 1));
  }
}

TEST(RunEpisode, RecordedRewardsAreUnshifted) {
  // Sutton's first step always pays exactly 0, so with a right turn the
  // shifted and unshifted learners record the same raw reward even though
  // their tables differ.
  const SuttonMdp env(8, -0.1);
  AgentConfig plain;
  plain.kind = AgentKind::kMaxmin;
  plain.estimators = 2;
  plain.shifts = {0.0, 0.0};
  AgentConfig shifted = plain;
  shifted.kind = AgentKind::kDaqMaxmin;
  shifted.shifts = {-1.0, -2.0};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng ra(seed), rb(seed);
    AgentState a = make_agent_state(plain, env.shape(), ra);
    AgentState b = make_agent_state(shifted, env.shape(), rb);
    const auto ea = run_episode(plain, a, env, ra, 100);
    const auto eb = run_episode(shifted, b, env, rb, 100);
    ASSERT_EQ(ea.first_action, eb.first_action);
    EXPECT_EQ(ea.total_reward, eb.total_reward);
    EXPECT_EQ(ea.length, eb.length);
    EXPECT_NE(a.q.tables, b.q.tables);
  }
}

TEST(Experiment, SingleRunMeanIsTheRunItself) {
  ExperimentConfig cfg = parse(kSmallSutton);
  cfg.runs = 1;
  const auto curves = run_experiment(cfg, 1);
  const SuttonMdp env(8, -0.1);
  for (std::size_t k = 0; k < cfg.agents.size(); ++k) {
    const AgentConfig& agent = cfg.agents[k].config;
    Rng rng(mix_seed(cfg.base_seed, k, 0));
    AgentState st = make_agent_state(agent, env.shape(), rng);
    std::vector<double> series;
    for (std::size_t e = 0; e < cfg.episodes; ++e)
      series.push_back(metric_value(cfg.metric, run_episode(agent, st, env, rng, cfg.max_steps)));
    EXPECT_EQ(curves.curves[k].mean, series);
    EXPECT_EQ(curves.curves[k].std_error, std::vector<double>(cfg.episodes, 0.0));
  }
}

TEST(Experiment, StandardErrorOfTheRunMean) {
  ExperimentConfig cfg = parse(kSmallSutton);
  const auto curves = run_experiment(cfg, 1);
  const auto& c = curves.at("dq");
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    // Indicator data: the sample variance follows from the mean alone.
    const double n = static_cast<double>(cfg.runs), p = c.mean[e];
    const double sd = std::sqrt(n * p * (1 - p) / (n - 1));
    EXPECT_NEAR(c.std_error[e], sd / std::sqrt(n), 1e-12);
  }
  EXPECT_THROW(curves.at("nobody"), std::out_of_range);
}

TEST(Experiment, DeterministicAndParallelEqualsSerial) {
  const ExperimentConfig cfg = parse(kSmallSutton);
  const fs::path dir = scratch("determinism");
  const std::string a = (dir / "serial").string(), b = (dir / "again").string(),
                    c = (dir / "parallel").string();
  emit_csv(run_experiment(cfg, 1), a);
  emit_csv(run_experiment(cfg, 1), b);
  emit_csv(run_experiment(cfg, 4), c);
  for (const auto& agent : cfg.agents) {
    const std::string reference = slurp(curve_filename(a, agent.label));
    ASSERT_FALSE(reference.empty());
    EXPECT_EQ(reference, slurp(curve_filename(b, agent.label)));
    EXPECT_EQ(reference, slurp(curve_filename(c, agent.label)));
  }
}

TEST(Experiment, AddingAnAgentLeavesEarlierCurvesAlone) {
  ExperimentConfig cfg = parse(kSmallSutton);
  const auto before = run_experiment(cfg, 1);
  LabeledAgent extra = cfg.agents.back();
  extra.label = "extra";
  cfg.agents.push_back(extra);
  const auto after = run_experiment(cfg, 2);
  for (std::size_t k = 0; k + 1 < cfg.agents.size(); ++k)
    EXPECT_EQ(before.curves[k].mean, after.curves[k].mean);
}

TEST(Experiment, WengTruncationsAreCounted) {
  ExperimentConfig cfg = parse("env.name = weng\nepisodes = 50\nruns = 4\nmax_steps = 2\n"
                               "agent.1.kind = q_learning\n");
  const auto curves = run_experiment(cfg, 1);
  EXPECT_EQ(curves.curves[0].total_episodes, 200u);
  EXPECT_GT(curves.curves[0].truncated_episodes, 0u);
}

TEST(Csv, RoundTripIsExact) {
  AggregatedCurves curves;
  Curve c;
  c.label = "a curve/with odd chars";
  c.mean = {0.1, -1.0 / 3.0, 1e-300, 12345.678901234567};
  c.std_error = {0.0, 2.0 / 7.0, 5e-324, 1.0};
  c.moving_avg = moving_average(c.mean, 2);
  curves.curves.push_back(c);
  const fs::path dir = scratch("roundtrip");
  const std::string index = emit_csv(curves, (dir / "out").string());
  EXPECT_EQ(slurp(index), "label,file\na curve/with odd chars,out_a_curve_with_odd_chars.csv\n");
  const Curve back = read_curve_csv(curve_filename((dir / "out").string(), c.label));
  EXPECT_EQ(back.mean, c.mean);
  EXPECT_EQ(back.std_error, c.std_error);
  EXPECT_EQ(back.moving_avg, c.moving_avg);
}

TEST(Csv, ThreeEpisodesGiveThreeRows) {
  AggregatedCurves curves;
  curves.curves.push_back(Curve{"x", {1, 2, 3}, {0, 0, 0}, {1, 1.5, 2}, 0, 3});
  const fs::path dir = scratch("rows");
  emit_csv(curves, (dir / "p").string());
  EXPECT_EQ(slurp(curve_filename((dir / "p").string(), "x")),
            "episode,mean,stderr,moving_avg\n0,1,0,1\n1,2,0,1.5\n2,3,0,2\n");
}

TEST(Csv, NoCurvesWritesOnlyTheIndex) {
  const fs::path dir = scratch("empty");
  const std::string index = emit_csv(AggregatedCurves{}, (dir / "nothing").string());
  EXPECT_EQ(slurp(index), "label,file\n");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator()), 1);
}

TEST(Csv, ErrorsCarryThePath) {
  try {
    read_curve_csv("/nonexistent/dir/file.csv");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/file.csv"), std::string::npos);
  }
}

TEST(Svg, WritesAFile) {
  ExperimentConfig cfg = parse(kSmallSutton);
  cfg.runs = 2;
  const fs::path dir = scratch("svg");
  emit_svg(run_experiment(cfg, 1), (dir / "plot.svg").string(), 0.05);
  EXPECT_NE(slurp((dir / "plot.svg").string()).find("<svg"), std::string::npos);
}

TEST(Config, ParsesEveryField) {
  const auto cfg = parse(R"(
# comment line
env.name = grid
env.reward = W
env.gamma = 0.9
episodes = 12   # trailing comment
runs = 3
seed = 77
metric = avg_reward_per_step
window = 5
max_steps = 40
out = somewhere/prefix
agent.2.label = second
agent.2.kind = minmax
agent.2.n = 3
agent.2.mode = sync
agent.2.init = uniform:-1,1
agent.1.label = first
agent.1.kind = daq_minmax
agent.1.shifts = -5,-10
agent.1.step_size = harmonic:10,100
agent.1.exploration = constant:0.2
agent.1.gamma = 0.5
)");
  EXPECT_EQ(cfg.env.name, "grid");
  EXPECT_EQ(cfg.env.reward, GridReward::kWang);
  EXPECT_EQ(cfg.env.gamma, 0.9);
  EXPECT_EQ(cfg.episodes, 12u);
  EXPECT_EQ(cfg.runs, 3u);
  EXPECT_EQ(cfg.base_seed, 77u);
  EXPECT_EQ(cfg.window, 5u);
  EXPECT_EQ(cfg.max_steps, 40u);
  EXPECT_EQ(cfg.out, "somewhere/prefix");
  ASSERT_EQ(cfg.agents.size(), 2u);
  const auto& first = cfg.agents[0];
  EXPECT_EQ(first.label, "first");
  EXPECT_EQ(first.config.kind, AgentKind::kDaqMinmax);
  EXPECT_EQ(first.config.estimators, 2u);
  EXPECT_EQ(first.config.shifts, (std::vector<double>{-5, -10}));
  EXPECT_EQ(std::get<EpisodeHarmonicStep>(first.config.step_size).offset, 100.0);
  EXPECT_EQ(std::get<ConstantEpsilon>(first.config.exploration).epsilon, 0.2);
  EXPECT_EQ(first.config.gamma, 0.5);
  const auto& second = cfg.agents[1];
  EXPECT_EQ(second.config.estimators, 3u);
  EXPECT_EQ(second.config.shifts, (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(second.config.mode, UpdateMode::kSync);
  EXPECT_TRUE(std::holds_alternative<UniformInit>(second.config.init));
  // Grid defaults when nothing is given.
  EXPECT_TRUE(std::holds_alternative<VisitPolynomialStep>(second.config.step_size));
  EXPECT_TRUE(std::holds_alternative<CountBasedEpsilon>(second.config.exploration));
  EXPECT_EQ(second.config.gamma, 0.9);
  EXPECT_NO_THROW(validate(cfg));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse("nonsense line"), ConfigError);
  EXPECT_THROW(parse("bogus = 1"), ConfigError);
  EXPECT_THROW(parse("runs = 1\nruns = 2"), ConfigError);
  EXPECT_THROW(parse("runs = -3"), ConfigError);
  EXPECT_THROW(parse("metric = median"), ConfigError);
  EXPECT_THROW(parse("metric.action = 1"), ConfigError);
  EXPECT_THROW(parse("agent.1.kind = sarsa"), ConfigError);
  EXPECT_THROW(parse("agent.1.step_size = cubic:3"), ConfigError);
  EXPECT_THROW(validate(parse("env.name = sutton\nagent.1.kind = q_learning\nagent.1.n = 2")),
               ConfigError);
  EXPECT_THROW(validate(parse("env.name = mars")), std::exception);
  EXPECT_THROW(validate(parse("env.name = sutton\nmetric = start_action_ratio\nmetric.action = 5")),
               ConfigError);
  EXPECT_THROW(validate(parse("agent.1.label = x\nagent.1.kind = q_learning\n"
                              "agent.2.label = x\nagent.2.kind = q_learning")),
               ConfigError);
  try {
    load_config("/no/such/config.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/no/such/config.cfg"), std::string::npos);
  }
}

TEST(Config, ShippedConfigsValidate) {
  for (const char* name : {"grid_h.cfg", "grid_w.cfg", "sutton_neg.cfg", "sutton_pos.cfg",
                           "weng.cfg"}) {
    const auto cfg = load_config(std::string(DAQ_CONFIG_DIR) + "/" + name);
    EXPECT_NO_THROW(validate(cfg)) << name;
    EXPECT_GE(cfg.agents.size(), 6u) << name;
  }
}

}  // namespace
