#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "releaser/cost_model.hpp"
#include "releaser/ddpg.hpp"
#include "releaser/error.hpp"
#include "releaser/stats.hpp"
#include "releaser/strategy.hpp"
#include "releaser/trace.hpp"

namespace releaser {

enum class Mode { train, evaluate };

/// Half-open range of whole days [first, last).
struct DayRange {
  int first = 0;
  int last = 0;
  int size() const { return last - first; }
  bool operator==(const DayRange&) const = default;
};

/// How a host-day's penalty is turned into per-step rewards while training.
enum class PenaltyAttribution {
  day_end,   ///< whole penalty on the last step of the day
  share,     ///< equal shares over the steps on which the metric violated
  marginal,  ///< each violating step pays penalty(N) - penalty(N-1)
};

struct SimulationConfig {
  int step_minutes = 3;
  PenaltyAttribution attribution = PenaltyAttribution::share;
  Mode mode = Mode::evaluate;
  DayRange days;  ///< empty range means the whole trace
  std::uint64_t seed = 0;
  int w_state = 10;
};

/// Chronological split on whole days: the first floor(days * fraction)
/// days train, the rest test.
inline std::pair<DayRange, DayRange> train_test_split(const Datacenter& dc, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("train fraction must be in (0,1)");
  const int days = dc.num_days();
  if (days < 2) throw DomainError("a train/test split needs at least 2 days, trace has " + std::to_string(days));
  int train = static_cast<int>(std::floor(days * train_fraction + 1e-9));
  train = std::clamp(train, 1, days - 1);
  return {DayRange{0, train}, DayRange{train, days}};
}

/// What happened on one host at one step.
struct StepOutcome {
  std::string host_id;
  std::int64_t step_index = 0;
  std::array<double, 2> margins{};
  int containers = 0;
  bool violated = false;
  std::array<double, 2> effective_error{};  ///< prediction + margin - usage
};

inline StepOutcome evaluate_step(const CostModel& cost, const HostSpec& spec, std::int64_t step,
                                 const std::array<double, 2>& usage, const std::array<double, 2>& prediction,
                                 const std::array<double, 2>& margins) {
  StepOutcome out;
  out.host_id = spec.host_id;
  out.step_index = step;
  out.margins = margins;
  for (int m = 0; m < 2; ++m) {
    out.effective_error[m] = prediction[m] + margins[m] - usage[m];
    if (out.effective_error[m] < 0.0) out.violated = true;
  }
  out.containers = containers_fitting(cost, spec, std::max(0.0, 1.0 - prediction[0] - margins[0]),
                                      std::max(0.0, 1.0 - prediction[1] - margins[1]));
  return out;
}

struct MoneyTotals {
  double violation_minutes = 0.0;
  double potential_saving = 0.0;
  double penalty = 0.0;
  double net_saving = 0.0;

  void add(const MoneyTotals& o) {
    violation_minutes += o.violation_minutes;
    potential_saving += o.potential_saving;
    penalty += o.penalty;
    net_saving += o.net_saving;
  }
  bool operator==(const MoneyTotals&) const = default;
};

struct TrainingLogRow {
  std::int64_t step = 0;
  double critic_mae = std::numeric_limits<double>::quiet_NaN();  ///< NaN before the first update
  double mean_reward = 0.0;                                      ///< dollars, over hosts
  double mean_margin = 0.0;
  int updates = 0;
};

struct HostReport {
  std::string host_id;
  std::vector<DayLedger> days;
  MoneyTotals totals;
  std::array<std::vector<double>, 2> margins;  ///< per metric, one per simulated step
  std::array<DistributionSummary, 2> margin_summary;
};

struct EvaluationReport {
  std::string strategy;
  DayRange days;
  int step_minutes = 3;
  std::int64_t first_step = 0;
  std::vector<HostReport> hosts;
  MoneyTotals datacenter;
  std::array<std::vector<HostCdf>, 2> error_cdfs;
  std::array<std::vector<TrainingLogRow>, 2> training_log;
};

/// One strategy instance per metric.
using StrategyPair = std::array<MarginStrategy*, 2>;

namespace detail {

/// window[i] = value(t - w + i), zero before the trace starts.
template <class Get>
void fill_window(std::vector<double>& window, std::size_t w, std::int64_t t, Get get) {
  window.assign(w, 0.0);
  for (std::size_t i = 0; i < w; ++i) {
    const std::int64_t idx = t - static_cast<std::int64_t>(w) + static_cast<std::int64_t>(i);
    if (idx >= 0) window[i] = get(static_cast<std::size_t>(idx));
  }
}

struct PendingTransition {
  std::size_t host = 0;
  int metric = 0;
  std::int64_t step = 0;
  bool violated = false;  ///< this metric crossed prediction + margin
  Transition transition;
};

}  // namespace detail

inline double reward_normalizer(const Datacenter& dc, const CostModel& cost) {
  int max_containers = 1;
  for (const auto& h : dc.hosts) max_containers = std::max(max_containers, containers_fitting(cost, h.spec, 1.0, 1.0));
  return cost.price_per_minute() * dc.step_minutes * max_containers;
}

/// Replays the trace day by day and step by step. Margins for step t only
/// see data up to t-1. In training mode every (host, metric) step served by
/// a learning strategy becomes one transition whose reward is the step's
/// revenue minus its part of the day's penalty (see PenaltyAttribution).
/// Transitions reach the agent at day end, once the penalty is known.
inline EvaluationReport run(const Datacenter& dc, const StrategyPair& strategies, const CostModel& cost,
                            const SimulationConfig& sim) {
  cost.validate();
  if (dc.hosts.empty()) throw DomainError("datacenter has no hosts");
  if (sim.step_minutes != dc.step_minutes)
    throw DomainError("simulation step of " + std::to_string(sim.step_minutes) +
                      " minutes does not match the trace step of " + std::to_string(dc.step_minutes));
  if (!strategies[0] || !strategies[1]) throw DomainError("a strategy is required for every metric");
  if (sim.w_state < 1) throw DomainError("w_state must be positive");
  const int spd = steps_per_day(sim.step_minutes);
  DayRange days = sim.days.size() == 0 ? DayRange{0, dc.num_days()} : sim.days;
  if (days.first < 0 || days.last > dc.num_days() || days.first >= days.last)
    throw DomainError("day range [" + std::to_string(days.first) + "," + std::to_string(days.last) +
                      ") is outside the trace (" + std::to_string(dc.num_days()) + " days)");

  std::array<DdpgAgent*, 2> learners{};
  if (sim.mode == Mode::train) {
    for (int m = 0; m < 2; ++m) learners[m] = strategies[m]->learner();
    const double scale = reward_normalizer(dc, cost);
    for (auto* a : learners)
      if (a) {
        if (a->config().w_state != sim.w_state) throw DomainError("agent w_state differs from the simulation's");
        a->set_reward_scale(scale);
      }
  }
  const std::size_t w = static_cast<std::size_t>(sim.w_state);
  std::array<std::size_t, 2> usage_len{strategies[0]->usage_history(), strategies[1]->usage_history()};

  EvaluationReport report;
  report.strategy = strategies[0]->name() == strategies[1]->name()
                        ? strategies[0]->name()
                        : strategies[0]->name() + "/" + strategies[1]->name();
  report.days = days;
  report.step_minutes = sim.step_minutes;
  report.first_step = static_cast<std::int64_t>(days.first) * spd;
  report.hosts.resize(dc.hosts.size());
  const auto total_steps = static_cast<std::size_t>(days.size()) * static_cast<std::size_t>(spd);
  for (std::size_t h = 0; h < dc.hosts.size(); ++h) {
    report.hosts[h].host_id = dc.hosts[h].spec.host_id;
    for (auto& v : report.hosts[h].margins) v.reserve(total_steps);
  }

  std::vector<std::array<double, 2>> last_margin(dc.hosts.size(), {0.0, 0.0});
  std::vector<double> violation(dc.hosts.size());
  std::vector<std::vector<int>> containers(dc.hosts.size());
  std::vector<int> violated_steps(dc.hosts.size());
  std::vector<detail::PendingTransition> pending;
  Observation obs;

  for (int d = days.first; d < days.last; ++d) {
    std::fill(violation.begin(), violation.end(), 0.0);
    std::fill(violated_steps.begin(), violated_steps.end(), 0);
    for (auto& c : containers) c.assign(static_cast<std::size_t>(spd), 0);
    pending.clear();
    std::vector<TrainingLogRow> day_rows(static_cast<std::size_t>(spd));

    for (int s = 0; s < spd; ++s) {
      const std::int64_t t = static_cast<std::int64_t>(d) * spd + s;
      for (std::size_t h = 0; h < dc.hosts.size(); ++h) {
        const HostTrace& host = dc.hosts[h];
        std::array<double, 2> margins{}, usage{}, prediction{};
        for (int m = 0; m < 2; ++m) {
          const auto& series = host.series[static_cast<std::size_t>(m)];
          obs.host_id = host.spec.host_id;
          obs.metric = static_cast<MetricKind>(m);
          detail::fill_window(obs.error_window, w, t,
                              [&](std::size_t i) { return std::clamp(series[i].error(), -1.0, 1.0); });
          detail::fill_window(obs.usage_window, usage_len[m], t, [&](std::size_t i) { return series[i].usage; });
          obs.last_margin = last_margin[h][m];
          margins[m] = clamp_margin(strategies[m]->select_margin(obs));
          usage[m] = series[static_cast<std::size_t>(t)].usage;
          prediction[m] = series[static_cast<std::size_t>(t)].prediction;
          if (learners[m]) {
            detail::PendingTransition p;
            p.host = h;
            p.metric = m;
            p.step = t;
            p.transition.state = obs.error_window;
            p.transition.action = margins[m];
            detail::fill_window(p.transition.next_state, w, t + 1,
                                [&](std::size_t i) { return std::clamp(series[i].error(), -1.0, 1.0); });
            pending.push_back(std::move(p));
          }
        }
        const StepOutcome out = evaluate_step(cost, host.spec, t, usage, prediction, margins);
        containers[h][static_cast<std::size_t>(s)] = out.containers;
        violation[h] = accumulate_violation(violation[h], out.violated, sim.step_minutes);
        if (out.violated) ++violated_steps[h];
        last_margin[h] = margins;
        for (int m = 0; m < 2; ++m) report.hosts[h].margins[m].push_back(margins[m]);
        if (learners[0] || learners[1]) {
          const double revenue = step_revenue(cost, out.containers, sim.step_minutes);
          for (auto it = pending.end() - (learners[0] && learners[1] ? 2 : 1); it != pending.end(); ++it) {
            it->transition.reward = revenue;
            it->violated = out.effective_error[it->metric] < 0.0;
          }
        }
      }
    }

    std::vector<double> penalty_charge(dc.hosts.size(), 0.0);
    for (std::size_t h = 0; h < dc.hosts.size(); ++h) {
      const Settlement money = settle_day(cost, containers[h], violation[h], sim.step_minutes);
      DayLedger ledger;
      ledger.host_id = dc.hosts[h].spec.host_id;
      ledger.day_index = d;
      ledger.violation_minutes = violation[h];
      ledger.potential_saving = money.potential_saving;
      ledger.penalty = money.penalty;
      ledger.net_saving = money.net_saving;
      ledger.per_step_containers = containers[h];
      report.hosts[h].days.push_back(std::move(ledger));
      if (sim.attribution == PenaltyAttribution::share && violated_steps[h] > 0) {
        penalty_charge[h] = money.penalty / violated_steps[h];
      } else if (sim.attribution == PenaltyAttribution::marginal && violated_steps[h] > 0) {
        const double one_less = violation[h] - sim.step_minutes;
        penalty_charge[h] = money.potential_saving * (discount_for(cost, violation[h]) - discount_for(cost, one_less));
      } else if (sim.attribution == PenaltyAttribution::day_end) {
        penalty_charge[h] = money.penalty;
      }
    }

    if (!pending.empty()) {
      std::array<std::vector<TrainingLogRow>, 2> rows;
      std::array<std::vector<double>, 2> mae_sum;
      for (int m = 0; m < 2; ++m)
        if (learners[m]) {
          rows[m].resize(static_cast<std::size_t>(spd));
          mae_sum[m].assign(static_cast<std::size_t>(spd), 0.0);
        }
      const double hosts = static_cast<double>(dc.hosts.size());
      for (auto& p : pending) {
        const bool last_step = p.step == static_cast<std::int64_t>(d + 1) * spd - 1;
        if (sim.attribution == PenaltyAttribution::day_end ? last_step : p.violated)
          p.transition.reward -= penalty_charge[p.host];
        const auto slot = static_cast<std::size_t>(p.step - static_cast<std::int64_t>(d) * spd);
        auto& row = rows[p.metric][slot];
        row.step = p.step;
        row.mean_reward += p.transition.reward / hosts;
        row.mean_margin += p.transition.action / hosts;
        const LearnStats st = learners[p.metric]->store_and_learn(std::move(p.transition));
        if (st.updated) {
          ++row.updates;
          mae_sum[p.metric][slot] += st.critic_mae;
        }
      }
      for (int m = 0; m < 2; ++m)
        for (std::size_t i = 0; i < rows[m].size(); ++i) {
          auto& row = rows[m][i];
          if (row.updates > 0) row.critic_mae = mae_sum[m][i] / row.updates;
          report.training_log[m].push_back(row);
        }
    }
  }

  for (auto& hr : report.hosts) {
    for (const auto& day : hr.days)
      hr.totals.add({day.violation_minutes, day.potential_saving, day.penalty, day.net_saving});
    report.datacenter.add(hr.totals);
    for (int m = 0; m < 2; ++m) hr.margin_summary[m] = summarize(hr.margins[m]);
  }
  const auto first = static_cast<std::size_t>(report.first_step);
  for (MetricKind m : kMetrics)
    report.error_cdfs[static_cast<int>(m)] = error_cdf(dc, m, first, first + total_steps);
  return report;
}

/// Convenience overload owning freshly built strategies.
inline EvaluationReport run(const Datacenter& dc, const StrategySpec& spec, const CostModel& cost,
                            const SimulationConfig& sim, std::array<DdpgAgent*, 2> agents = {}) {
  const bool explore = sim.mode == Mode::train;
  auto cpu = make_strategy(spec, MetricKind::cpu, sim.seed, agents[0], explore);
  auto ram = make_strategy(spec, MetricKind::ram, sim.seed, agents[1], explore);
  return run(dc, StrategyPair{cpu.get(), ram.get()}, cost, sim);
}

/// a / b, with 1 when both are equal (including both zero) and infinity
/// when only b is zero.
inline double safe_ratio(double a, double b) {
  if (a == b) return 1.0;
  if (b == 0.0) return std::numeric_limits<double>::infinity();
  return a / b;
}

struct ComparisonRow {
  std::string strategy;
  MoneyTotals totals;
  double net_ratio = 1.0;      ///< vs baseline
  double penalty_ratio = 1.0;  ///< vs baseline
};

struct Comparison {
  std::string baseline;
  std::vector<EvaluationReport> reports;
  std::vector<ComparisonRow> rows;
};

/// Runs every strategy over the same days and seed in evaluation mode.
/// Runs are independent and execute concurrently.
inline Comparison compare_strategies(const Datacenter& dc, const CostModel& cost, SimulationConfig sim,
                                     const std::vector<StrategySpec>& specs, std::array<DdpgAgent*, 2> agents = {},
                                     std::string baseline = {}) {
  if (specs.empty()) throw DomainError("nothing to compare");
  sim.mode = Mode::evaluate;
  std::vector<std::future<EvaluationReport>> futures;
  for (const auto& spec : specs)
    futures.push_back(std::async(std::launch::async, [&dc, &cost, sim, spec, agents] {
      return run(dc, spec, cost, sim, agents);
    }));
  Comparison out;
  for (auto& f : futures) out.reports.push_back(f.get());
  if (baseline.empty()) baseline = specs.front().label();
  const EvaluationReport* base = nullptr;
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (specs[i].label() == baseline) base = &out.reports[i];
  if (!base) throw ConfigError("baseline", "baseline '" + baseline + "' is not among the compared strategies");
  out.baseline = baseline;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    ComparisonRow row;
    row.strategy = specs[i].label();
    row.totals = out.reports[i].datacenter;
    row.net_ratio = safe_ratio(row.totals.net_saving, base->datacenter.net_saving);
    row.penalty_ratio = safe_ratio(row.totals.penalty, base->datacenter.penalty);
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace releaser
