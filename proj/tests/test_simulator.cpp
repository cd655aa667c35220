#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "releaser/simulator.hpp"

using namespace releaser;

namespace {

/// One host, constant usage/prediction per metric.
Datacenter flat(int days, double usage, double prediction, HostSpec spec = {"h0", 24, 128.0}) {
  Datacenter dc;
  dc.name = "flat";
  HostTrace h;
  h.spec = spec;
  for (MetricKind m : kMetrics)
    for (int t = 0; t < days * 480; ++t) h.of(m).push_back(TraceSample{t, usage, prediction});
  dc.hosts.push_back(h);
  return dc;
}

Datacenter synthetic(std::uint64_t seed, int hosts, int days) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.num_hosts = hosts;
  cfg.num_days = days;
  cfg.spike_prob_per_step = 0.01;
  cfg.spike_magnitude = 0.2;
  return generate_synthetic(cfg);
}

SimulationConfig sim_config(std::uint64_t seed = 1) {
  SimulationConfig sim;
  sim.seed = seed;
  return sim;
}

DdpgConfig quick_ddpg() {
  DdpgConfig cfg;
  cfg.batch_size = 16;
  cfg.warmup_steps = 64;
  cfg.replay_capacity = 2000;
  return cfg;
}

}  // namespace

TEST(Split, ChronologicalWholeDays) {
  auto [train, test] = train_test_split(flat(10, 0.1, 0.1), 0.8);
  EXPECT_EQ(train, (DayRange{0, 8}));
  EXPECT_EQ(test, (DayRange{8, 10}));
  auto [a, b] = train_test_split(flat(2, 0.1, 0.1), 0.5);
  EXPECT_EQ(a, (DayRange{0, 1}));
  EXPECT_EQ(b, (DayRange{1, 2}));
  EXPECT_THROW(train_test_split(flat(1, 0.1, 0.1), 0.8), DomainError);
}

TEST(Run, PerfectPredictionsNoViolations) {
  const auto dc = flat(2, 0.3, 0.3);
  const CostModel cost;
  const auto r = run(dc, StrategySpec{StrategyKind::fixed, 0.0}, cost, sim_config());
  const int nb = containers_fitting(cost, dc.hosts[0].spec, 0.7, 0.7);
  const auto want = settle_day(cost, std::vector<int>(480, nb), 0, 3);
  ASSERT_EQ(r.hosts[0].days.size(), 2u);
  for (const auto& d : r.hosts[0].days) {
    EXPECT_EQ(d.violation_minutes, 0);
    EXPECT_EQ(d.potential_saving, want.potential_saving);
    EXPECT_EQ(d.penalty, 0.0);
  }
}

TEST(Run, WorstCaseTopTier) {
  const auto dc = flat(1, 1.0, 0.0);
  const auto r = run(dc, StrategySpec{StrategyKind::fixed, 0.0}, CostModel{}, sim_config());
  const auto& d = r.hosts[0].days[0];
  EXPECT_EQ(d.violation_minutes, 1440);
  EXPECT_GT(d.potential_saving, 0.0);
  EXPECT_EQ(d.penalty, d.potential_saving * 0.30);
}

TEST(Run, MatchesSingleFileOracle) {
  const auto dc = synthetic(31, 3, 1);
  std::ostringstream csv;
  write_traces(csv, dc);
  std::map<std::string, oracle::HostCaps> caps;
  for (const auto& h : dc.hosts) caps[h.spec.host_id] = {h.spec.cpu_cores, h.spec.ram_gb};
  const auto want = oracle::fixed_margin_ledger(csv.str(), caps, 0.05, 3);
  const auto r = run(dc, StrategySpec{StrategyKind::fixed, 0.05}, CostModel{}, sim_config());
  std::size_t k = 0;
  double total_net = 0.0;
  for (const auto& h : r.hosts)
    for (const auto& d : h.days) {
      ASSERT_LT(k, want.size());
      EXPECT_EQ(d.host_id, want[k].host);
      EXPECT_EQ(d.day_index, want[k].day);
      EXPECT_EQ(d.violation_minutes, want[k].violation_minutes);
      EXPECT_EQ(d.potential_saving, want[k].potential);
      EXPECT_EQ(d.penalty, want[k].penalty);
      EXPECT_EQ(d.net_saving, want[k].net);
      total_net += want[k].net;
      ++k;
    }
  EXPECT_EQ(k, want.size());
  EXPECT_DOUBLE_EQ(r.datacenter.net_saving, total_net);
}

TEST(Run, ConservationAndTiers) {
  const auto dc = synthetic(32, 3, 4);
  for (const char* s : {"fixed:0", "fixed:0.03", "random", "feedback", "scavenger"}) {
    const auto r = run(dc, StrategySpec::parse(s), CostModel{}, sim_config());
    MoneyTotals sum;
    for (const auto& h : r.hosts) {
      sum.add(h.totals);
      for (const auto& d : h.days) {
        EXPECT_EQ(d.net_saving, d.potential_saving - d.penalty);
        EXPECT_GE(d.violation_minutes, 0);
        EXPECT_LE(d.violation_minutes, 1440);
        EXPECT_EQ(std::fmod(d.violation_minutes, 3.0), 0.0);
        if (d.potential_saving > 0) {
          const double ratio = d.penalty / d.potential_saving;
          EXPECT_TRUE(d.penalty == 0 || d.penalty == d.potential_saving * 0.10 ||
                      d.penalty == d.potential_saving * 0.15 || d.penalty == d.potential_saving * 0.30)
              << ratio;
        }
      }
    }
    EXPECT_EQ(sum, r.datacenter);
  }
}

TEST(Run, ErrorsBeforeStepping) {
  const auto dc = flat(2, 0.3, 0.3);
  auto sim = sim_config();
  sim.step_minutes = 5;
  EXPECT_THROW(run(dc, StrategySpec{}, CostModel{}, sim), DomainError);
  sim = sim_config();
  sim.days = {1, 3};
  EXPECT_THROW(run(dc, StrategySpec{}, CostModel{}, sim), DomainError);
  EXPECT_THROW(run(dc, StrategySpec::parse("releaser"), CostModel{}, sim_config()), ConfigError);
}

TEST(Run, MarginsSeeOnlyThePast) {
  auto dc = synthetic(33, 2, 2);
  DdpgAgent cpu(DdpgConfig{}, AgentSeeds::derive(1, "cpu")), ram(DdpgConfig{}, AgentSeeds::derive(1, "ram"));
  for (const char* s : {"feedback", "scavenger", "releaser"}) {
    const auto base = run(dc, StrategySpec::parse(s), CostModel{}, sim_config(), {&cpu, &ram});
    for (std::size_t t : {0u, 10u, 479u, 700u}) {
      auto changed = dc;
      for (auto& h : changed.hosts)
        for (MetricKind m : kMetrics) h.of(m)[t].usage = 1.0 - h.of(m)[t].usage;
      const auto r = run(changed, StrategySpec::parse(s), CostModel{}, sim_config(), {&cpu, &ram});
      for (std::size_t h = 0; h < r.hosts.size(); ++h)
        for (int m = 0; m < 2; ++m)
          for (std::size_t k = 0; k <= t; ++k) ASSERT_EQ(r.hosts[h].margins[m][k], base.hosts[h].margins[m][k]) << s;
    }
  }
}

TEST(Run, RaisingFixedMarginNeverAddsViolations) {
  const auto dc = synthetic(34, 4, 3);
  double prev = 1e18;
  for (double margin : {0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5}) {
    const auto r = run(dc, StrategySpec{StrategyKind::fixed, margin}, CostModel{}, sim_config());
    double total = 0;
    for (const auto& h : r.hosts) total += h.totals.violation_minutes;
    EXPECT_LE(total, prev);
    prev = total;
  }
}

TEST(Run, DeterministicIncludingTraining) {
  const auto dc = synthetic(35, 2, 3);
  auto once = [&] {
    DdpgAgent cpu(quick_ddpg(), AgentSeeds::derive(4, "cpu")), ram(quick_ddpg(), AgentSeeds::derive(4, "ram"));
    auto sim = sim_config(4);
    sim.mode = Mode::train;
    sim.days = {0, 2};
    run(dc, StrategySpec::parse("releaser"), CostModel{}, sim, {&cpu, &ram});
    sim.mode = Mode::evaluate;
    sim.days = {2, 3};
    return run(dc, StrategySpec::parse("releaser"), CostModel{}, sim, {&cpu, &ram});
  };
  const auto a = once(), b = once();
  EXPECT_EQ(a.datacenter, b.datacenter);
  for (std::size_t h = 0; h < a.hosts.size(); ++h) {
    EXPECT_EQ(a.hosts[h].days, b.hosts[h].days);
    EXPECT_EQ(a.hosts[h].margins, b.hosts[h].margins);
  }
}

TEST(Run, TrainingLogAccounting) {
  const auto dc = synthetic(36, 2, 2);
  DdpgAgent cpu(quick_ddpg(), AgentSeeds::derive(5, "cpu")), ram(quick_ddpg(), AgentSeeds::derive(5, "ram"));
  auto sim = sim_config(5);
  sim.mode = Mode::train;
  const auto r = run(dc, StrategySpec::parse("releaser"), CostModel{}, sim, {&cpu, &ram});
  for (int m = 0; m < 2; ++m) {
    ASSERT_EQ(r.training_log[m].size(), 960u);
    EXPECT_TRUE(std::isnan(r.training_log[m].front().critic_mae));
    EXPECT_FALSE(std::isnan(r.training_log[m].back().critic_mae));
    for (std::size_t i = 0; i < 960; ++i) EXPECT_EQ(r.training_log[m][i].step, static_cast<std::int64_t>(i));
  }
  EXPECT_EQ(cpu.replay().size(), 960u * 2);
}

TEST(Run, RewardsAddUpToNetSavings) {
  // only CPU can violate, so every host violation is charged to the CPU agent
  auto dc = synthetic(37, 2, 2);
  for (auto& h : dc.hosts)
    for (auto& s : h.of(MetricKind::ram)) s = TraceSample{s.step_index, 0.0, 0.2};
  for (auto attribution : {PenaltyAttribution::day_end, PenaltyAttribution::share}) {
    DdpgAgent cpu(quick_ddpg(), AgentSeeds::derive(6, "cpu"));
    FixedStrategy fixed(0.0);
    ReleaserStrategy learner(cpu, true);
    auto sim = sim_config(6);
    sim.mode = Mode::train;
    sim.attribution = attribution;
    const auto r = run(dc, StrategyPair{&learner, &fixed}, CostModel{}, sim);
    ASSERT_EQ(r.training_log[1].size(), 0u);
    for (int d = 0; d < 2; ++d) {
      double rewards = 0.0, net = 0.0;
      for (int s = 0; s < 480; ++s) rewards += r.training_log[0][static_cast<std::size_t>(d * 480 + s)].mean_reward * 2;
      for (const auto& h : r.hosts) net += h.days[static_cast<std::size_t>(d)].net_saving;
      EXPECT_NEAR(rewards, net, 1e-9);
    }
  }
}

TEST(Run, ReportSummariesMatchNaiveRecomputation) {
  const auto dc = synthetic(38, 3, 2);
  const auto r = run(dc, StrategySpec::parse("feedback"), CostModel{}, sim_config());
  for (const auto& h : r.hosts)
    for (int m = 0; m < 2; ++m) {
      const auto& s = h.margin_summary[m];
      EXPECT_EQ(s.median, oracle::percentile(h.margins[m], 50));
      EXPECT_EQ(s.q3, oracle::percentile(h.margins[m], 75));
      EXPECT_EQ(s.min, oracle::percentile(h.margins[m], 0));
    }
  EXPECT_EQ(r.error_cdfs[0].size(), 3u);
}

TEST(Compare, SelfRatiosAndExtremes) {
  const auto dc = synthetic(39, 2, 2);
  const auto c = compare_strategies(dc, CostModel{}, sim_config(),
                                    {StrategySpec{StrategyKind::fixed, 0.0}, StrategySpec{StrategyKind::fixed, 0.99}});
  ASSERT_EQ(c.rows.size(), 2u);
  EXPECT_EQ(c.baseline, "fixed(0)");
  EXPECT_EQ(c.rows[0].net_ratio, 1.0);
  EXPECT_EQ(c.rows[0].penalty_ratio, 1.0);
  EXPECT_LE(c.rows[1].totals.penalty, c.rows[0].totals.penalty);
  EXPECT_LE(c.rows[1].totals.potential_saving, c.rows[0].totals.potential_saving);
  EXPECT_GT(c.rows[0].totals.penalty, 0.0);
  EXPECT_THROW(compare_strategies(dc, CostModel{}, sim_config(), {StrategySpec{}}, {}, "random"), ConfigError);
}
