// daqlab: command-line front end for the tabular DAQ laboratory.
//
//   daqlab run --config FILE [--runs R] [--seed S] [--out PREFIX] [--workers W] [--svg]
//   daqlab bound --alpha A --gamma G --n N --size-sa SA --d-min D --d-max D --t T
//                [--sweep-to T1 --sweep-step K]
//   daqlab oracle --env grid|sutton|weng [--reward H|W] [--k K] [--mu MU] [--m M] [--shift B]
//   daqlab equiv-check --env NAME [env params] --shifts b1,b2,... --order maxmin|minmax
//                      --steps T --seed S

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "daq/daq.hpp"

namespace {

void add_env_options(CLI::App* cmd, daq::EnvironmentSpec& spec, std::string& reward) {
  cmd->add_option("--env", spec.name, "environment: grid, sutton or weng")->required();
  cmd->add_option("--reward", reward, "grid reward variant: H or W")->default_val("H");
  cmd->add_option("--k", spec.k, "sutton: number of actions at B")->default_val(8);
  cmd->add_option("--mu", spec.mu, "sutton: mean reward at B")->default_val(-0.1);
  cmd->add_option("--m", spec.m, "weng: number of inner states")->default_val(8);
  cmd->add_option("--gamma", spec.gamma, "grid: discount factor")->default_val(0.95);
}

std::string join(const std::vector<daq::ActionId>& xs) {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < xs.size(); ++k) os << (k ? "," : "") << xs[k];
  os << '}';
  return os.str();
}

int cmd_run(const std::string& path, std::optional<std::size_t> runs,
            std::optional<std::uint64_t> seed, std::optional<std::string> out,
            std::size_t workers, bool svg) {
  daq::ExperimentConfig cfg = daq::load_config(path);
  if (runs) cfg.runs = *runs;
  if (seed) cfg.base_seed = *seed;
  if (out) cfg.out = *out;
  daq::validate(cfg);
  const auto curves = daq::run_experiment(cfg, workers);
  const std::string index = daq::emit_csv(curves, cfg.out);
  if (svg) daq::emit_svg(curves, cfg.out + ".svg");
  std::cout << "index: " << index << "\n";
  for (const auto& c : curves.curves) {
    std::cout << c.label << ": final moving average " << daq::format_double(c.moving_avg.back())
              << ", truncated " << c.truncated_episodes << "/" << c.total_episodes << "\n";
  }
  return 0;
}

int cmd_bound(const daq::BoundParams& p, std::optional<double> sweep_to, double sweep_step) {
  const double r = daq::rho(p);
  if (!sweep_to) {
    const auto b = daq::theorem1_bound(p);
    std::cout << std::setprecision(17) << "rho: " << r << "\nterm1: " << b.constant
              << "\nterm2: " << b.geometric << "\nterm3: " << b.transient
              << "\ntotal: " << b.total << "\n";
    return 0;
  }
  if (!(sweep_step > 0.0)) throw std::invalid_argument("--sweep-step must be positive");
  std::cout << "t,term1,term2,term3,total\n";
  for (double t = p.t; t <= *sweep_to; t += sweep_step) {
    daq::BoundParams q = p;
    q.t = t;
    const auto b = daq::theorem1_bound(q);
    std::cout << daq::format_double(t) << ',' << daq::format_double(b.constant) << ','
              << daq::format_double(b.geometric) << ',' << daq::format_double(b.transient) << ','
              << daq::format_double(b.total) << '\n';
  }
  return 0;
}

int cmd_oracle(const daq::EnvironmentSpec& spec, double shift) {
  const auto env = daq::make_environment(spec);
  const auto mdp = std::visit([](const auto& e) { return e.expected_mdp(); }, env);
  const auto res = daq::value_iteration(mdp, shift);
  std::cout << "iterations: " << res.iterations << "\nresidual: " << res.residual << "\n";
  std::cout << "state,action,q\n";
  for (daq::StateId s = 0; s < mdp.shape.num_states(); ++s)
    for (daq::ActionId a = 0; a < mdp.shape.num_actions(s); ++a)
      std::cout << s << ',' << a << ',' << daq::format_double(res.qstar(s, a)) << '\n';
  std::cout << "greedy:\n";
  for (daq::StateId s = 0; s < res.policy.size(); ++s)
    std::cout << "  " << s << " -> " << join(res.policy[s]) << '\n';
  return 0;
}

int cmd_equiv(const daq::EnvironmentSpec& spec, const std::vector<double>& shifts,
              const std::string& order, std::uint64_t steps, std::uint64_t seed) {
  const auto env = daq::make_environment(spec);
  daq::AgentConfig cfg;
  cfg.kind = daq::parse_target_order(order) == daq::TargetOrder::kMaxmin
                 ? daq::AgentKind::kDaqMaxmin
                 : daq::AgentKind::kDaqMinmax;
  cfg.estimators = shifts.size();
  cfg.shifts = shifts;
  cfg.mode = daq::UpdateMode::kAsync;
  const auto sched = daq::default_schedules(spec);
  cfg.step_size = sched.step_size;
  cfg.exploration = sched.exploration;
  cfg.gamma = daq::environment_discount(spec);
  const auto rep = std::visit(
      [&](const auto& e) { return daq::verify_equivalence(e, cfg, steps, seed); }, env);
  std::cout << rep.describe();
  return rep.exact() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular dummy adversarial Q-learning laboratory"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a seeded multi-run experiment from a config file");
  std::string config_path;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t workers = daq::default_workers();
  bool svg = false;
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--runs", runs, "override the number of runs");
  run->add_option("--seed", seed, "override the base seed");
  run->add_option("--out", out, "override the output prefix");
  run->add_option("--workers", workers, "concurrent runs (default: DAQ_WORKERS or cores)");
  run->add_flag("--svg", svg, "also write <out>.svg with the moving averages");

  auto* bound = app.add_subcommand("bound", "evaluate the finite-time error bound");
  daq::BoundParams bp;
  std::optional<double> sweep_to;
  double sweep_step = 1.0;
  bound->add_option("--alpha", bp.alpha, "constant step size")->required();
  bound->add_option("--gamma", bp.gamma, "discount factor")->required();
  bound->add_option("--n", bp.estimators, "number of estimators")->required();
  bound->add_option("--size-sa", bp.size_sa, "|S x A|")->required();
  bound->add_option("--d-min", bp.d_min, "minimum sampling probability")->required();
  bound->add_option("--d-max", bp.d_max, "maximum sampling probability")->required();
  bound->add_option("--t", bp.t, "iteration step (sweep start)")->default_val(0);
  bound->add_option("--sweep-to", sweep_to, "emit CSV rows for t up to this value");
  bound->add_option("--sweep-step", sweep_step, "t increment for the sweep")->default_val(1);

  auto* oracle = app.add_subcommand("oracle", "value iteration on the expected-reward MDP");
  daq::EnvironmentSpec oracle_env;
  std::string oracle_reward;
  double shift = 0.0;
  add_env_options(oracle, oracle_env, oracle_reward);
  oracle->add_option("--shift", shift, "constant reward shift")->default_val(0.0);

  auto* equiv = app.add_subcommand("equiv-check",
                                   "compare async DAQ with minimax Q-learning on the augmented game");
  daq::EnvironmentSpec equiv_env;
  std::string equiv_reward, order = "maxmin";
  std::vector<double> shifts;
  std::uint64_t steps = 1000, equiv_seed = 1;
  add_env_options(equiv, equiv_env, equiv_reward);
  equiv->add_option("--shifts", shifts, "reward shifts b1,b2,...")->required()->delimiter(',');
  equiv->add_option("--order", order, "maxmin or minmax")->default_val("maxmin");
  equiv->add_option("--steps", steps, "number of transitions")->default_val(1000);
  equiv->add_option("--seed", equiv_seed, "seed shared by both learners")->default_val(1);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, runs, seed, out, workers, svg);
    if (*bound) return cmd_bound(bp, sweep_to, sweep_step);
    if (*oracle) {
      oracle_env.reward = daq::parse_grid_reward(oracle_reward);
      return cmd_oracle(oracle_env, shift);
    }
    if (*equiv) {
      equiv_env.reward = daq::parse_grid_reward(equiv_reward);
      return cmd_equiv(equiv_env, shifts, order, steps, equiv_seed);
    }
  } catch (const std::exception& e) {
    std::cerr << "daqlab: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
