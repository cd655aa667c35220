#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "releaser/ddpg.hpp"
#include "releaser/error.hpp"
#include "releaser/report_io.hpp"
#include "releaser/scenario.hpp"
#include "releaser/simulator.hpp"
#include "releaser/trace.hpp"

namespace releaser {

inline std::string checkpoint_name(MetricKind m) { return "agent_" + std::string(to_string(m)) + ".ckpt"; }
inline std::string training_log_name(MetricKind m) { return "train_log_" + std::string(to_string(m)) + ".csv"; }

namespace detail {

inline std::filesystem::path prepare_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw ConfigError("output_dir", "cannot create " + dir.string() + (ec ? ": " + ec.message() : ""));
  return dir;
}

}  // namespace detail

/// Writes trace.csv and capacities.csv for a synthetic scenario and prints
/// per-metric usage statistics.
inline void cmd_generate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
  if (cfg.source != TraceSource::synthetic) throw ConfigError("source", "generate needs source = synthetic");
  const Datacenter dc = cfg.datacenter();
  detail::prepare_output_dir(out_dir);
  detail::write_atomically(out_dir / "trace.csv", [&](std::ostream& o) { write_traces(o, dc); });
  detail::write_atomically(out_dir / "capacities.csv", [&](std::ostream& o) { write_capacities(o, dc); });

  log << "generated " << dc.hosts.size() << " hosts x " << dc.num_days() << " days (" << dc.num_steps()
      << " steps of " << dc.step_minutes << " min) into " << out_dir.string() << '\n';
  for (MetricKind m : kMetrics) {
    double usage = 0.0, under = 0.0, n = 0.0;
    for (const auto& h : dc.hosts)
      for (const auto& s : h.of(m)) {
        usage += s.usage;
        under += s.error() > 0.0 ? 1.0 : 0.0;
        n += 1.0;
      }
    log << "  " << to_string(m) << ": mean usage " << detail::fixed(100.0 * usage / n, 2) << "%, underestimated steps "
        << detail::fixed(100.0 * under / n, 2) << "%\n";
  }
}

struct TrainResult {
  std::array<std::unique_ptr<DdpgAgent>, 2> agents;
  std::array<std::vector<TrainingLogRow>, 2> log;
  std::vector<MoneyTotals> epoch_totals;
  DayRange days;
};

/// Trains one agent per metric on the chronological training split, for
/// `ddpg.epochs` passes. Log steps count training steps across epochs, so
/// epoch e's first row is e * (train days * steps per day).
inline TrainResult train_agents(const ScenarioConfig& cfg, const Datacenter& dc) {
  TrainResult result;
  result.days = train_test_split(dc, cfg.ddpg.train_fraction).first;
  for (MetricKind m : kMetrics)
    result.agents[static_cast<int>(m)] =
        std::make_unique<DdpgAgent>(cfg.ddpg, AgentSeeds::derive(cfg.seed, to_string(m)));
  SimulationConfig sim = cfg.simulation();
  sim.mode = Mode::train;
  sim.days = result.days;
  for (int e = 0; e < cfg.ddpg.epochs; ++e) {
    auto report = run(dc, StrategySpec{StrategyKind::releaser, 0.0}, cfg.cost, sim,
                      {result.agents[0].get(), result.agents[1].get()});
    result.epoch_totals.push_back(report.datacenter);
    const std::int64_t offset = static_cast<std::int64_t>(e) * result.days.size() * cfg.ddpg.steps_per_day -
                                static_cast<std::int64_t>(result.days.first) * cfg.ddpg.steps_per_day;
    for (int m = 0; m < 2; ++m)
      for (auto row : report.training_log[m]) {
        row.step += offset;
        result.log[m].push_back(row);
      }
  }
  return result;
}

/// Trains and writes agent_<metric>.ckpt plus train_log_<metric>.csv.
inline void cmd_train(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
  if (!cfg.uses_releaser()) throw ConfigError("evaluate", "train needs releaser in the strategy list");
  const Datacenter dc = cfg.datacenter();
  detail::prepare_output_dir(out_dir);
  const TrainResult result = train_agents(cfg, dc);
  for (std::size_t e = 0; e < result.epoch_totals.size(); ++e)
    log << "epoch " << e + 1 << ": days " << result.days.first << "-" << result.days.last - 1 << ", net "
        << detail::fixed(result.epoch_totals[e].net_saving) << ", penalty " << detail::fixed(result.epoch_totals[e].penalty) << '\n';
  for (MetricKind m : kMetrics) {
    const int i = static_cast<int>(m);
    detail::write_atomically(out_dir / training_log_name(m),
                             [&](std::ostream& o) { write_training_log_csv(o, result.log[i]); });
    detail::write_atomically(out_dir / checkpoint_name(m), [&](std::ostream& o) { result.agents[i]->save(o); });
    log << "wrote " << (out_dir / checkpoint_name(m)).string() << '\n';
  }
}

inline std::unique_ptr<DdpgAgent> load_agent(const std::filesystem::path& path, const DdpgConfig& expected) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("file", "cannot open " + path.string());
  auto agent = std::make_unique<DdpgAgent>(DdpgAgent::load(in));
  if (agent->config().w_state != expected.w_state)
    throw CheckpointError("config", path.string() + " was trained with w_state " +
                                        std::to_string(agent->config().w_state) + ", scenario uses " +
                                        std::to_string(expected.w_state));
  return agent;
}

/// Runs every configured strategy on the test split with exploration off,
/// writes one report directory per strategy plus comparison.{csv,json}, and
/// prints the comparison table.
inline Comparison cmd_evaluate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                               const std::filesystem::path& checkpoint_dir, std::ostream& log) {
  const Datacenter dc = cfg.datacenter();
  std::array<std::unique_ptr<DdpgAgent>, 2> agents;
  if (cfg.uses_releaser())
    for (MetricKind m : kMetrics) agents[static_cast<int>(m)] = load_agent(checkpoint_dir / checkpoint_name(m), cfg.ddpg);
  detail::prepare_output_dir(out_dir);

  SimulationConfig sim = cfg.simulation();
  sim.days = train_test_split(dc, cfg.ddpg.train_fraction).second;
  Comparison cmp = compare_strategies(dc, cfg.cost, sim, cfg.strategies, {agents[0].get(), agents[1].get()},
                                      cfg.baseline);
  for (std::size_t i = 0; i < cmp.reports.size(); ++i)
    write_report_files(out_dir / strategy_slug(cfg.strategies[i].label()), cmp.reports[i]);
  detail::write_atomically(out_dir / "comparison.csv", [&](std::ostream& o) { write_comparison_csv(o, cmp); });
  detail::write_atomically(out_dir / "comparison.json", [&](std::ostream& o) { o << to_json(cmp).dump(2) << '\n'; });

  log << "test days " << sim.days.first << "-" << sim.days.last - 1 << " (" << dc.hosts.size() << " hosts)\n";
  print_comparison(log, cmp);
  return cmp;
}

}  // namespace releaser
