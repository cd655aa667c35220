// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. The benchmark pipeline runs twice (determinism) and the
// first run's evaluation feeds the ordering and report-integrity checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "releaser/commands.hpp"

namespace fs = std::filesystem;
using namespace releaser;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  " << id << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(double v, int digits = 4) { return detail::fixed(v, digits); }

// --- 1 ------------------------------------------------------------------------

void cost_model_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20210901);
  const CostModel model;
  int mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    const int ts = (k % 3 == 0) ? 5 : 3;
    const auto day = oracle::random_host_day(rng, ts);
    double minutes = 0.0;
    for (bool v : day.violated) minutes = accumulate_violation(minutes, v, ts);
    const Settlement s = settle_day(model, day.containers, minutes, ts);
    const auto want = oracle::walk_day(day.containers, day.violated, ts, 0.0317);
    if (minutes != want.violation_minutes || s.potential_saving != want.potential || s.penalty != want.penalty ||
        s.net_saving != want.net)
      ++mismatches;
  }
  const double secs = seconds_since(t0);
  report("1 cost-model oracle", mismatches == 0 && secs < 5.0,
         std::to_string(mismatches) + " bitwise mismatches in 1000 host-days, " + fmt(secs, 3) + " s");
}

// --- 2 ------------------------------------------------------------------------

void discount_table() {
  const CostModel model;
  const std::vector<std::pair<double, double>> table{{15, 0.0},    {16, 0.10},  {120, 0.10},
                                                     {121, 0.15},  {720, 0.15}, {721, 0.30}};
  std::string bad;
  for (auto [minutes, want] : table)
    if (discount_for(model, minutes) != want) bad += " " + fmt(minutes, 0);
  report("2 discount tiers", bad.empty(), bad.empty() ? "15/16/120/121/720/721 exact" : "wrong at" + bad);
}

// --- 3 ------------------------------------------------------------------------

// Worst relative error between backward() and central differences over every
// weight, bias and input of one net.
double gradient_check(nn::DenseNet net, Rng& rng) {
  const int in = static_cast<int>(net.layers().front().weights.cols());
  std::normal_distribution<double> g(0.0, 1.0);
  nn::Matrix x(in, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  nn::Matrix up(1, 4);
  for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = g(rng);

  const auto grads = net.backward(net.forward_trace(x), up);
  auto objective = [&](const nn::Matrix& input) { return (net.forward(input).array() * up.array()).sum(); };
  const double h = 1e-6;
  double worst = 0.0;
  auto check = [&](double& param, double analytic, const nn::Matrix& input) {
    const double keep = param;
    param = keep + h;
    const double plus = objective(input);
    param = keep - h;
    const double minus = objective(input);
    param = keep;
    const double fd = (plus - minus) / (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-6});
    worst = std::max(worst, std::abs(fd - analytic) / scale);
  };
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    auto& layer = net.layers()[k];
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
      check(layer.weights.data()[i], grads.weights[k].data()[i], x);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) check(layer.bias.data()[i], grads.bias[k].data()[i], x);
  }
  nn::Matrix probe = x;
  for (Eigen::Index i = 0; i < probe.size(); ++i) check(probe.data()[i], grads.input.data()[i], probe);
  return worst;
}

void gradient_checks() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(seed, "gradcheck"));
    using nn::Activation;
    nn::DenseNet actor({{10, 16, Activation::relu}, {16, 16, Activation::relu}, {16, 1, Activation::linear}}, rng);
    nn::DenseNet critic({{11, 32, Activation::relu}, {32, 32, Activation::relu}, {32, 1, Activation::linear}}, rng);
    worst = std::max({worst, gradient_check(actor, rng), gradient_check(critic, rng)});
  }
  const double secs = seconds_since(t0);
  std::ostringstream msg;
  msg << "max relative error " << std::scientific << worst << " over 20 seeds x {actor, critic}, " << std::fixed
      << secs << " s";
  report("3 gradient checks", worst <= 1e-4 && secs < 10.0, msg.str());
}

// --- 4 ------------------------------------------------------------------------

void ou_statistics() {
  OuProcess ou(0.15, 0.0, 0.3, derive_seed(1, "ou"));
  const int burn = 1000, n = 100000;
  for (int i = 0; i < burn; ++i) ou.step();
  std::vector<double> xs(n);
  for (auto& x : xs) x = ou.step();
  const double sd = population_stddev(xs);
  const double target = 0.3 / std::sqrt(2.0 * 0.15);
  const double rel = std::abs(sd - target) / target;
  report("4 OU statistics", rel <= 0.10,
         "stddev " + fmt(sd) + " vs " + fmt(target) + " (" + fmt(100.0 * rel, 1) + "% off)");
}

// --- 5 ------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), root).generic_string()] = s.str();
  }
  return files;
}

struct PipelineRun {
  Comparison comparison;
  double seconds = 0.0;
};

PipelineRun pipeline(const ScenarioConfig& cfg, const fs::path& dir) {
  fs::remove_all(dir);
  std::ostringstream quiet;
  PipelineRun r;
  const auto t0 = Clock::now();
  cmd_generate(cfg, dir / "generate", quiet);
  cmd_train(cfg, dir / "train", quiet);
  r.comparison = cmd_evaluate(cfg, dir / "evaluate", dir / "train", quiet);
  r.seconds = seconds_since(t0);
  return r;
}

// --- 6 ------------------------------------------------------------------------

const MoneyTotals& totals_of(const Comparison& c, const std::string& label) {
  for (const auto& row : c.rows)
    if (row.strategy == label) return row.totals;
  throw std::runtime_error("strategy " + label + " missing from the benchmark comparison");
}

void benchmark_ordering(const ScenarioConfig& cfg, const Comparison& cmp) {
  const auto& rl = totals_of(cmp, "releaser");
  const auto& random = totals_of(cmp, "random");
  const auto& fixed5 = totals_of(cmp, "fixed(0.05)");

  report("6a releaser vs random", rl.net_saving > 1.2 * random.net_saving,
         "net " + fmt(rl.net_saving) + " vs random " + fmt(random.net_saving) + " (x" +
             fmt(rl.net_saving / random.net_saving, 3) + ", need > 1.2)");
  report("6b releaser penalty vs fixed(0.05)", rl.penalty <= fixed5.penalty,
         "penalty " + fmt(rl.penalty) + " vs " + fmt(fixed5.penalty));

  const Datacenter dc = cfg.datacenter();
  SimulationConfig sim = cfg.simulation();
  sim.days = train_test_split(dc, cfg.ddpg.train_fraction).second;
  std::vector<StrategySpec> sweep;
  for (int pct = 0; pct <= 20; ++pct) sweep.push_back(StrategySpec{StrategyKind::fixed, pct / 100.0});
  const Comparison swept = compare_strategies(dc, cfg.cost, sim, sweep);
  const auto best = std::max_element(swept.rows.begin(), swept.rows.end(), [](const auto& a, const auto& b) {
    return a.totals.net_saving < b.totals.net_saving;
  });
  report("6c releaser vs best fixed margin", rl.net_saving >= 0.95 * best->totals.net_saving,
         "net " + fmt(rl.net_saving) + " vs best " + best->strategy + " " + fmt(best->totals.net_saving) + " (" +
             fmt(100.0 * rl.net_saving / best->totals.net_saving, 1) + "%, need >= 95%)");
}

// --- 7 ------------------------------------------------------------------------

void monotonicity() {
  std::mt19937_64 rng(7007);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const CostModel cost;
  int comparisons = 0, violations = 0;
  for (int trace = 0; trace < 100; ++trace) {
    SyntheticConfig sc;
    sc.seed = rng();
    sc.num_hosts = 2;
    sc.num_days = 2;
    sc.base_load = 0.1 + 0.5 * unit(rng);
    sc.daily_amplitude = 0.3 * unit(rng);
    sc.noise_sigma = 0.05 * unit(rng);
    sc.spike_prob_per_step = 0.02 * unit(rng);
    sc.spike_magnitude = 0.3 * unit(rng);
    sc.prediction_noise_sigma = 0.1 * unit(rng);
    sc.prediction_noise_ar_coeff = 0.95 * unit(rng);
    const Datacenter dc = generate_synthetic(sc);
    SimulationConfig sim;
    for (int pair = 0; pair < 5; ++pair) {
      double lo = 0.3 * unit(rng), hi = 0.3 * unit(rng);
      if (lo > hi) std::swap(lo, hi);
      FixedStrategy lo_cpu(lo), lo_ram(lo), hi_cpu(hi), hi_ram(hi);
      const auto a = run(dc, StrategyPair{&lo_cpu, &lo_ram}, cost, sim);
      const auto b = run(dc, StrategyPair{&hi_cpu, &hi_ram}, cost, sim);
      for (std::size_t h = 0; h < a.hosts.size(); ++h)
        for (std::size_t d = 0; d < a.hosts[h].days.size(); ++d) {
          ++comparisons;
          if (b.hosts[h].days[d].violation_minutes > a.hosts[h].days[d].violation_minutes) ++violations;
        }
    }
  }
  report("7 margin monotonicity", violations == 0,
         std::to_string(violations) + " increases in " + std::to_string(comparisons) +
             " host-day comparisons (100 traces x 5 margin pairs)");
}

// --- 8 ------------------------------------------------------------------------

void report_integrity(const Comparison& cmp) {
  int totals_bad = 0, summaries_bad = 0, summaries = 0;
  for (const auto& r : cmp.reports) {
    MoneyTotals sum;
    for (const auto& h : r.hosts) {
      MoneyTotals host;
      for (const auto& d : h.days) {
        host.violation_minutes += d.violation_minutes;
        host.potential_saving += d.potential_saving;
        host.penalty += d.penalty;
        host.net_saving += d.net_saving;
      }
      auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
      if (!near(h.totals.potential_saving, host.potential_saving) || !near(h.totals.penalty, host.penalty) ||
          !near(h.totals.net_saving, host.net_saving) || h.totals.violation_minutes != host.violation_minutes)
        ++totals_bad;
      sum.add(h.totals);
      for (int m = 0; m < 2; ++m) {
        ++summaries;
        const auto& v = h.margins[m];
        const auto& s = h.margin_summary[m];
        const double lo = *std::min_element(v.begin(), v.end());
        const double hi = *std::max_element(v.begin(), v.end());
        if (s.min != lo || s.max != hi || s.q1 != oracle::percentile(v, 25) ||
            s.median != oracle::percentile(v, 50) || s.q3 != oracle::percentile(v, 75))
          ++summaries_bad;
      }
    }
    if (r.datacenter.potential_saving != sum.potential_saving || r.datacenter.penalty != sum.penalty ||
        r.datacenter.net_saving != sum.net_saving || r.datacenter.violation_minutes != sum.violation_minutes)
      ++totals_bad;
  }
  report("8 report integrity", totals_bad == 0 && summaries_bad == 0,
         std::to_string(totals_bad) + " total mismatches, " + std::to_string(summaries_bad) + "/" +
             std::to_string(summaries) + " margin summaries differ from a sort-based recomputation");
}

}  // namespace

int main() {
  try {
    cost_model_oracle();
    discount_table();
    gradient_checks();
    ou_statistics();

    const auto cfg = load_scenario(fs::path(RELEASER_SCENARIO_DIR) / "benchmark.ini");
    const fs::path root = fs::temp_directory_path() / "releaser_acceptance";
    const PipelineRun first = pipeline(cfg, root / "a");
    const PipelineRun second = pipeline(cfg, root / "b");
    const auto fa = snapshot(root / "a"), fb = snapshot(root / "b");
    std::size_t differing = 0;
    for (const auto& [name, bytes] : fa) {
      const auto it = fb.find(name);
      if (it == fb.end() || it->second != bytes) ++differing;
    }
    const double slowest = std::max(first.seconds, second.seconds);
    report("5 determinism", fa.size() == fb.size() && differing == 0 && !fa.empty() && slowest < 900.0,
           std::to_string(fa.size()) + " files, " + std::to_string(differing) + " differ; pipeline " +
               fmt(first.seconds, 1) + " s / " + fmt(second.seconds, 1) + " s");

    benchmark_ordering(cfg, first.comparison);
    monotonicity();
    report_integrity(first.comparison);
    fs::remove_all(root);
  } catch (const std::exception& e) {
    std::cout << "FAIL  acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
