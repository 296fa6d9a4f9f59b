#pragma once

// Seeded multi-run experiments: episode loop, per-episode metrics, run
// aggregation, moving averages and CSV/SVG output.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <thread>
#include <variant>
#include <vector>

#include "daq/agents.hpp"
#include "daq/config.hpp"
#include "daq/core.hpp"
#include "daq/envs.hpp"

namespace daq {

struct EpisodeResult {
  double total_reward = 0.0;  // raw environment rewards, never shifted
  std::size_t length = 0;
  ActionId first_action = 0;
  bool truncated = false;
};

/// act -> draw estimator -> env step -> update, until Terminal or max_steps.
/// Increments the agent's episode counter afterwards.
template <Environment Env>
EpisodeResult run_episode(const AgentConfig& cfg, AgentState& st, const Env& env, Rng& rng,
                          std::size_t max_steps) {
  EpisodeResult res;
  StateId s = env.reset();
  for (;;) {
    const ActionId a = act(cfg, st, s, rng);
    if (res.length == 0) res.first_action = a;
    const auto i = draw_estimator(cfg, rng);
    const TransitionOutcome out = env.step(s, a, rng);
    update(cfg, st, s, a, out, i, rng);
    res.total_reward += out.reward;
    ++res.length;
    if (out.terminal) break;
    if (res.length >= max_steps) {
      res.truncated = true;
      break;
    }
    s = out.next;
  }
  ++st.episode;
  return res;
}

inline double metric_value(const MetricKind& metric, const EpisodeResult& ep) {
  return std::visit(overloaded{
                        [&](const AvgRewardPerStep&) {
                          return ep.total_reward / static_cast<double>(ep.length);
                        },
                        [&](const StartActionRatio& r) {
                          return ep.first_action == r.action ? 1.0 : 0.0;
                        },
                    },
                    metric);
}

/// Element k is the mean of series[max(0, k-window+1) .. k]; the window
/// grows at the head.
inline std::vector<double> moving_average(const std::vector<double>& series, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: window must be at least 1");
  std::vector<double> out(series.size());
  for (std::size_t k = 0; k < series.size(); ++k) {
    const std::size_t lo = k + 1 >= window ? k + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = lo; j <= k; ++j) sum += series[j];
    out[k] = sum / static_cast<double>(k - lo + 1);
  }
  return out;
}

struct Curve {
  std::string label;
  std::vector<double> mean;
  std::vector<double> std_error;
  std::vector<double> moving_avg;
  std::uint64_t truncated_episodes = 0;
  std::uint64_t total_episodes = 0;
};

struct AggregatedCurves {
  std::vector<Curve> curves;

  const Curve& at(const std::string& label) const {
    for (const auto& c : curves)
      if (c.label == label) return c;
    throw std::out_of_range("no curve labelled '" + label + "'");
  }
};

/// Worker count from DAQ_WORKERS, else the hardware concurrency.
inline std::size_t default_workers() {
  if (const char* env = std::getenv("DAQ_WORKERS")) {
    const std::string v(env);
    std::size_t n = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec == std::errc() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace harness_detail {

struct RunOutput {
  std::vector<double> metric;
  std::uint64_t truncated = 0;
};

template <Environment Env>
RunOutput single_run(const ExperimentConfig& cfg, const Env& env, std::size_t label_index,
                     std::size_t run) {
  const AgentConfig& agent = cfg.agents[label_index].config;
  Rng rng(mix_seed(cfg.base_seed, label_index, run));
  AgentState st = make_agent_state(agent, env.shape(), rng);
  RunOutput out;
  out.metric.resize(cfg.episodes);
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    const EpisodeResult ep = run_episode(agent, st, env, rng, cfg.max_steps);
    out.metric[e] = metric_value(cfg.metric, ep);
    out.truncated += ep.truncated;
  }
  return out;
}

/// Runs body(k) for k in [0, n) on up to `workers` threads.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k; !failed && (k = next.fetch_add(1)) < n;) {
          try {
            body(k);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace harness_detail

/**
 * Runs every agent label for cfg.runs independent runs of cfg.episodes
 * episodes. Run r of label k draws from the stream seeded by
 * mix_seed(base_seed, k, r), and aggregation walks runs in index order, so the
 * result does not depend on `workers`.
 */
inline AggregatedCurves run_experiment(const ExperimentConfig& cfg,
                                       std::size_t workers = default_workers()) {
  validate(cfg);
  const AnyEnvironment env = make_environment(cfg.env);
  AggregatedCurves result;
  for (std::size_t k = 0; k < cfg.agents.size(); ++k) {
    std::vector<harness_detail::RunOutput> runs(cfg.runs);
    harness_detail::parallel_for(cfg.runs, workers, [&](std::size_t r) {
      runs[r] = std::visit([&](const auto& e) { return harness_detail::single_run(cfg, e, k, r); },
                           env);
    });

    Curve c;
    c.label = cfg.agents[k].label;
    c.mean.assign(cfg.episodes, 0.0);
    c.std_error.assign(cfg.episodes, 0.0);
    c.total_episodes = static_cast<std::uint64_t>(cfg.runs) * cfg.episodes;
    const auto n = static_cast<double>(cfg.runs);
    for (const auto& run : runs) {
      c.truncated_episodes += run.truncated;
      for (std::size_t e = 0; e < cfg.episodes; ++e) c.mean[e] += run.metric[e];
    }
    for (double& m : c.mean) m /= n;
    if (cfg.runs > 1) {
      for (std::size_t e = 0; e < cfg.episodes; ++e) {
        double ss = 0.0;
        for (const auto& run : runs) {
          const double d = run.metric[e] - c.mean[e];
          ss += d * d;
        }
        c.std_error[e] = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
      }
    }
    c.moving_avg = moving_average(c.mean, cfg.window);
    result.curves.push_back(std::move(c));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("format_double: to_chars failed");
  return std::string(buf, p);
}

inline std::string sanitize_label(const std::string& label) {
  std::string s;
  for (char ch : label) s += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_') ? ch : '_';
  return s.empty() ? "curve" : s;
}

inline std::string curve_filename(const std::string& prefix, const std::string& label) {
  return prefix + "_" + sanitize_label(label) + ".csv";
}

namespace harness_detail {
inline std::ofstream open_for_write(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw std::runtime_error(path + ": cannot create directory: " + ec.message());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  return out;
}
}  // namespace harness_detail

/// One `episode,mean,stderr,moving_avg` file per curve plus `<prefix>_index.csv`
/// mapping label -> filename. Returns the index path.
inline std::string emit_csv(const AggregatedCurves& curves, const std::string& prefix) {
  const std::string index_path = prefix + "_index.csv";
  auto index = harness_detail::open_for_write(index_path);
  index << "label,file\n";
  for (const auto& c : curves.curves) {
    const std::string path = curve_filename(prefix, c.label);
    auto out = harness_detail::open_for_write(path);
    out << "episode,mean,stderr,moving_avg\n";
    for (std::size_t e = 0; e < c.mean.size(); ++e) {
      out << e << ',' << format_double(c.mean[e]) << ',' << format_double(c.std_error[e]) << ','
          << format_double(c.moving_avg[e]) << '\n';
    }
    if (!out) throw std::runtime_error(path + ": write failed");
    index << c.label << ',' << std::filesystem::path(path).filename().string() << '\n';
  }
  if (!index) throw std::runtime_error(index_path + ": write failed");
  return index_path;
}

/// Parses a file written by emit_csv back into a curve (label left empty).
inline Curve read_curve_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line != "episode,mean,stderr,moving_avg")
    throw std::runtime_error(path + ": unexpected header");
  Curve c;
  auto parse = [&](const std::string& field) {
    double x = 0.0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), x);
    if (ec != std::errc() || p != field.data() + field.size())
      throw std::runtime_error(path + ": bad number '" + field + "'");
    return x;
  };
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string ep, m, se, ma;
    if (!std::getline(ss, ep, ',') || !std::getline(ss, m, ',') || !std::getline(ss, se, ',') ||
        !std::getline(ss, ma))
      throw std::runtime_error(path + ": malformed row '" + line + "'");
    c.mean.push_back(parse(m));
    c.std_error.push_back(parse(se));
    c.moving_avg.push_back(parse(ma));
  }
  return c;
}

/// Static SVG of the moving averages with an optional horizontal reference
/// line. Cosmetic only.
inline void emit_svg(const AggregatedCurves& curves, const std::string& path,
                     std::optional<double> reference = std::nullopt) {
  constexpr double W = 800, H = 480, pad = 50;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t len = 1;
  for (const auto& c : curves.curves) {
    for (double v : c.moving_avg) lo = std::min(lo, v), hi = std::max(hi, v);
    len = std::max(len, c.moving_avg.size());
  }
  if (reference) lo = std::min(lo, *reference), hi = std::max(hi, *reference);
  if (!(hi > lo)) hi = lo + 1.0;
  auto x = [&](std::size_t k) { return pad + (W - 2 * pad) * static_cast<double>(k) / static_cast<double>(std::max<std::size_t>(len - 1, 1)); };
  auto y = [&](double v) { return H - pad - (H - 2 * pad) * (v - lo) / (hi - lo); };
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  auto out = harness_detail::open_for_write(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"5\" y=\"" << y(hi) << "\" font-size=\"11\">" << format_double(hi) << "</text>\n"
      << "<text x=\"5\" y=\"" << y(lo) << "\" font-size=\"11\">" << format_double(lo) << "</text>\n";
  if (reference)
    out << "<line x1=\"" << pad << "\" x2=\"" << W - pad << "\" y1=\"" << y(*reference) << "\" y2=\""
        << y(*reference) << "\" stroke=\"black\" stroke-dasharray=\"4\"/>\n";
  for (std::size_t k = 0; k < curves.curves.size(); ++k) {
    const auto& c = curves.curves[k];
    const char* colour = palette[k % std::size(palette)];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
    const std::size_t stride = std::max<std::size_t>(1, c.moving_avg.size() / 2000);
    for (std::size_t e = 0; e < c.moving_avg.size(); e += stride)
      out << x(e) << ',' << y(c.moving_avg[e]) << ' ';
    out << "\"/>\n<text x=\"" << W - pad - 150 << "\" y=\"" << pad + 14 * static_cast<double>(k)
        << "\" font-size=\"12\" fill=\"" << colour << "\">" << c.label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace daq
