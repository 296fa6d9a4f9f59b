#pragma once

// Experiment description and its flat `key = value` file format.
//
//   # comment
//   env.name = grid              # grid | sutton | weng
//   env.reward = H               # grid: H | W
//   env.gamma = 0.95             # grid only
//   env.k = 8                    # sutton: actions at B
//   env.mu = -0.1                # sutton: mean reward at B
//   env.m = 8                    # weng: inner states
//   episodes = 10000
//   runs = 500
//   seed = 1
//   metric = avg_reward_per_step # or start_action_ratio
//   metric.action = 0            # start_action_ratio: action index
//   window = 100
//   max_steps = 100000
//   out = results/grid_h
//   agent.1.label = daq-maxmin
//   agent.1.kind = daq_maxmin    # q_learning | double_q | maxmin | minmax | daq_maxmin | daq_minmax
//   agent.1.n = 2
//   agent.1.shifts = -5,-10
//   agent.1.mode = async         # async | sync
//   agent.1.step_size = visit_poly:0.8   # constant:A | visit_poly:P | harmonic:C,D
//   agent.1.exploration = count_based    # constant:E | count_based
//   agent.1.gamma = 0.95         # defaults to the environment's discount
//                                # (schedules default to default_schedules())
//   agent.1.init = zeros         # zeros | uniform:LO,HI
//
// Agents are ordered by their numeric index.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "daq/agents.hpp"
#include "daq/core.hpp"
#include "daq/envs.hpp"

namespace daq {

struct AvgRewardPerStep {};
/// Indicator that the first action of the episode equals `action`.
struct StartActionRatio {
  ActionId action = 0;
};
using MetricKind = std::variant<AvgRewardPerStep, StartActionRatio>;

struct LabeledAgent {
  std::string label;
  AgentConfig config;
};

struct ExperimentConfig {
  EnvironmentSpec env;
  std::vector<LabeledAgent> agents;
  std::size_t episodes = 1000;
  std::size_t runs = 100;
  std::uint64_t base_seed = 1;
  MetricKind metric = AvgRewardPerStep{};
  std::size_t window = 100;
  std::size_t max_steps = 100'000;
  std::string out = "out/experiment";
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace config_detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(trim(item));
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": not a number: '" + v + "'");
  return x;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end)
    throw ConfigError(key + ": not a nonnegative integer: '" + v + "'");
  return x;
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& part : split(v, ',')) out.push_back(to_double(key, part));
  return out;
}

/// "name" or "name:args"
inline std::pair<std::string, std::string> tagged(const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) return {v, {}};
  return {trim(v.substr(0, colon)), trim(v.substr(colon + 1))};
}

}  // namespace config_detail

inline StepSizeSchedule parse_step_size(const std::string& v) {
  using namespace config_detail;
  const auto [tag, args] = tagged(v);
  if (tag == "constant") return ConstantStep{to_double("step_size", args)};
  if (tag == "visit_poly") return VisitPolynomialStep{to_double("step_size", args)};
  if (tag == "harmonic") {
    const auto xs = to_doubles("step_size", args);
    if (xs.size() != 2) throw ConfigError("step_size: harmonic takes scale,offset");
    return EpisodeHarmonicStep{xs[0], xs[1]};
  }
  throw ConfigError("step_size: unknown schedule '" + v + "'");
}

inline ExplorationSchedule parse_exploration(const std::string& v) {
  using namespace config_detail;
  const auto [tag, args] = tagged(v);
  if (tag == "constant") return ConstantEpsilon{to_double("exploration", args)};
  if (tag == "count_based") return CountBasedEpsilon{};
  throw ConfigError("exploration: unknown schedule '" + v + "'");
}

inline InitSpec parse_init(const std::string& v) {
  using namespace config_detail;
  const auto [tag, args] = tagged(v);
  if (tag == "zeros") return ZeroInit{};
  if (tag == "uniform") {
    const auto xs = to_doubles("init", args);
    if (xs.size() != 2) throw ConfigError("init: uniform takes lo,hi");
    return UniformInit{xs[0], xs[1]};
  }
  throw ConfigError("init: unknown scheme '" + v + "'");
}

inline double environment_discount(const EnvironmentSpec& spec) {
  return spec.name == "grid" ? spec.gamma : 1.0;
}

struct Schedules {
  StepSizeSchedule step_size;
  ExplorationSchedule exploration;
};

/// Benchmark schedules: 1/n(s,a)^0.8 with 1/sqrt(n(s)) exploration on the
/// grid, constant 0.1/0.1 on Sutton's chain, 10/(n+100) with epsilon 0.1 on
/// Weng's chain.
inline Schedules default_schedules(const EnvironmentSpec& spec) {
  if (spec.name == "grid") return {VisitPolynomialStep{0.8}, CountBasedEpsilon{}};
  if (spec.name == "weng") return {EpisodeHarmonicStep{10.0, 100.0}, ConstantEpsilon{0.1}};
  return {ConstantStep{0.1}, ConstantEpsilon{0.1}};
}

inline ExperimentConfig parse_config(std::istream& in) {
  using namespace config_detail;
  std::map<std::string, std::string> kv;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
    kv[key] = trim(line.substr(eq + 1));
  }

  ExperimentConfig cfg;
  std::map<std::uint64_t, std::map<std::string, std::string>> agents;
  std::optional<std::string> metric_action;
  for (const auto& [key, v] : kv) {
    if (key == "env.name") cfg.env.name = v;
    else if (key == "env.reward") cfg.env.reward = parse_grid_reward(v);
    else if (key == "env.gamma") cfg.env.gamma = to_double(key, v);
    else if (key == "env.k") cfg.env.k = to_uint(key, v);
    else if (key == "env.mu") cfg.env.mu = to_double(key, v);
    else if (key == "env.m") cfg.env.m = to_uint(key, v);
    else if (key == "episodes") cfg.episodes = to_uint(key, v);
    else if (key == "runs") cfg.runs = to_uint(key, v);
    else if (key == "seed") cfg.base_seed = to_uint(key, v);
    else if (key == "window") cfg.window = to_uint(key, v);
    else if (key == "max_steps") cfg.max_steps = to_uint(key, v);
    else if (key == "out") cfg.out = v;
    else if (key == "metric") {
      if (v == "avg_reward_per_step") cfg.metric = AvgRewardPerStep{};
      else if (v == "start_action_ratio") cfg.metric = StartActionRatio{};
      else throw ConfigError("metric: unknown kind '" + v + "'");
    } else if (key == "metric.action") {
      metric_action = v;
    } else if (key.rfind("agent.", 0) == 0) {
      const auto parts = split(key, '.');
      if (parts.size() != 3) throw ConfigError(key + ": expected agent.<index>.<field>");
      agents[to_uint(key, parts[1])][parts[2]] = v;
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  if (metric_action) {
    auto* ratio = std::get_if<StartActionRatio>(&cfg.metric);
    if (!ratio) throw ConfigError("metric.action only applies to start_action_ratio");
    ratio->action = to_uint("metric.action", *metric_action);
  }

  for (const auto& [index, fields] : agents) {
    LabeledAgent la;
    la.label = "agent" + std::to_string(index);
    AgentConfig& a = la.config;
    a.gamma = environment_discount(cfg.env);
    const Schedules defaults = default_schedules(cfg.env);
    a.step_size = defaults.step_size;
    a.exploration = defaults.exploration;
    std::optional<std::uint64_t> n;
    std::optional<std::vector<double>> shifts;
    for (const auto& [field, v] : fields) {
      const std::string key = "agent." + std::to_string(index) + "." + field;
      try {
        if (field == "label") la.label = v;
        else if (field == "kind") a.kind = parse_agent_kind(v);
        else if (field == "n") n = to_uint(key, v);
        else if (field == "shifts") shifts = to_doubles(key, v);
        else if (field == "mode") {
          if (v == "async") a.mode = UpdateMode::kAsync;
          else if (v == "sync") a.mode = UpdateMode::kSync;
          else throw ConfigError("unknown mode '" + v + "'");
        } else if (field == "step_size") a.step_size = parse_step_size(v);
        else if (field == "exploration") a.exploration = parse_exploration(v);
        else if (field == "gamma") a.gamma = to_double(key, v);
        else if (field == "init") a.init = parse_init(v);
        else throw ConfigError("unknown field");
      } catch (const std::exception& e) {
        throw ConfigError(key + ": " + e.what());
      }
    }
    if (!n) {
      if (shifts) n = shifts->size();
      else if (a.kind == AgentKind::kDoubleQ) n = 2;
      else n = 1;
    }
    a.estimators = *n;
    a.shifts = shifts ? *shifts : std::vector<double>(a.estimators, 0.0);
    cfg.agents.push_back(std::move(la));
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return parse_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Checks everything that can be checked before the first run starts.
inline void validate(const ExperimentConfig& cfg) {
  if (cfg.runs < 1) throw ConfigError("runs must be at least 1");
  if (cfg.episodes < 1) throw ConfigError("episodes must be at least 1");
  if (cfg.window < 1) throw ConfigError("window must be at least 1");
  if (cfg.max_steps < 1) throw ConfigError("max_steps must be at least 1");
  const AnyEnvironment env = make_environment(cfg.env);
  const TableShape shape = std::visit([](const auto& e) { return e.shape(); }, env);
  const StateId start = std::visit([](const auto& e) { return e.reset(); }, env);
  if (auto* r = std::get_if<StartActionRatio>(&cfg.metric); r && !shape.valid(start, r->action))
    throw ConfigError("metric.action " + std::to_string(r->action) +
                      " is not valid at the start state");
  for (std::size_t k = 0; k < cfg.agents.size(); ++k) {
    for (std::size_t j = 0; j < k; ++j)
      if (cfg.agents[j].label == cfg.agents[k].label)
        throw ConfigError("duplicate agent label '" + cfg.agents[k].label + "'");
    try {
      validate(cfg.agents[k].config);
    } catch (const std::exception& e) {
      throw ConfigError("agent '" + cfg.agents[k].label + "': " + e.what());
    }
  }
}

}  // namespace daq
