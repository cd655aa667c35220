#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "releaser/cost_model.hpp"
#include "releaser/ddpg.hpp"
#include "releaser/error.hpp"
#include "releaser/seed.hpp"
#include "releaser/simulator.hpp"
#include "releaser/strategy.hpp"
#include "releaser/trace.hpp"

namespace releaser {

enum class TraceSource { synthetic, file };

/// Everything one run needs, read from a single INI-style file.
///
///   [scenario]   seed (required), name, output_dir
///   [trace]      source = synthetic|file, path, capacities, step_minutes
///   [synthetic]  SyntheticConfig fields
///   [cost]       price_per_hour, container_cpu, container_ram_gb,
///                tiers = "15:0, 120:0.10, 720:0.15, inf:0.30"
///   [simulation] attribution = share|day_end|marginal
///   [strategies] evaluate = comma list (fixed:0.05, random, ...), baseline
///   [ddpg]       DdpgConfig fields, critic_loss = mae|mse
///
/// Relative input paths resolve against the scenario file's directory;
/// output_dir resolves against the working directory.
struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";

  TraceSource source = TraceSource::synthetic;
  std::filesystem::path trace_path;
  std::filesystem::path capacities_path;
  int step_minutes = 3;
  SyntheticConfig synthetic;

  CostModel cost;
  PenaltyAttribution attribution = PenaltyAttribution::share;
  std::vector<StrategySpec> strategies{StrategySpec{}};
  std::string baseline;  ///< label; first strategy when empty
  DdpgConfig ddpg;

  bool uses_releaser() const {
    for (const auto& s : strategies)
      if (s.kind == StrategyKind::releaser) return true;
    return false;
  }

  SimulationConfig simulation() const {
    SimulationConfig sim;
    sim.step_minutes = step_minutes;
    sim.attribution = attribution;
    sim.seed = seed;
    sim.w_state = ddpg.w_state;
    return sim;
  }

  /// The configured trace: generated from the "trace" sub-seed, or loaded.
  Datacenter datacenter() const {
    if (source == TraceSource::synthetic) return generate_synthetic(synthetic);
    return load_traces(trace_path.string(), load_capacities(capacities_path.string()), step_minutes);
  }
};

namespace detail {

using boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& scenario_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"scenario", {"seed", "name", "output_dir"}},
      {"trace", {"source", "path", "capacities", "step_minutes"}},
      {"synthetic",
       {"num_hosts", "num_days", "daily_amplitude", "base_load", "ram_base_load", "noise_ar_coeff", "noise_sigma",
        "spike_prob_per_step", "spike_magnitude", "spike_decay", "prediction_bias", "prediction_noise_sigma",
        "prediction_noise_ar_coeff", "smoothing_window", "host_cpu_cores", "host_ram_gb"}},
      {"cost", {"price_per_hour", "container_cpu", "container_ram_gb", "tiers"}},
      {"simulation", {"attribution"}},
      {"strategies", {"evaluate", "baseline"}},
      {"ddpg",
       {"alpha", "gamma", "replay_capacity", "batch_size", "warmup_steps", "ou_theta", "ou_mu", "ou_sigma",
        "target_update_days", "w_state", "train_fraction", "critic_loss", "epochs"}},
  };
  return schema;
}

/// Typed access to one section; every failure names the key.
class Section {
 public:
  Section(const ptree* tree) : tree_(tree) {}

  std::optional<std::string> text(const std::string& key) const {
    if (!tree_) return std::nullopt;
    auto v = tree_->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return std::string(trim(*v));
  }

  void number(const std::string& key, double& out) const {
    if (auto v = text(key))
      if (!parse_number(*v, out)) throw ConfigError(key, "not a number: '" + *v + "'");
  }

  template <class Int>
  void integer(const std::string& key, Int& out) const {
    if (auto v = text(key)) {
      Int parsed{};
      const char* end = v->data() + v->size();
      auto [ptr, ec] = std::from_chars(v->data(), end, parsed);
      if (ec != std::errc() || ptr != end || v->empty()) throw ConfigError(key, "not an integer: '" + *v + "'");
      out = parsed;
    }
  }

 private:
  const ptree* tree_;
};

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  for (auto item : split_csv(text)) {
    auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

/// "15:0, 120:0.10, 720:0.15, inf:0.30" -> contiguous tiers from 0.
inline std::vector<DiscountTier> parse_tiers(std::string_view text) {
  std::vector<DiscountTier> tiers;
  double lower = 0.0;
  for (const auto& item : split_list(text)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("tiers", "expected upper:discount, got '" + item + "'");
    const auto upper_text = trim(std::string_view(item).substr(0, colon));
    double upper = 0.0, discount = 0.0;
    if (upper_text == "inf") upper = std::numeric_limits<double>::infinity();
    else if (!parse_number(upper_text, upper)) throw ConfigError("tiers", "bad upper bound in '" + item + "'");
    if (!parse_number(trim(std::string_view(item).substr(colon + 1)), discount))
      throw ConfigError("tiers", "bad discount in '" + item + "'");
    tiers.push_back(DiscountTier{lower, upper, discount});
    lower = upper;
  }
  return tiers;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

/// Parses and validates a scenario. `base_dir` anchors relative input paths.
inline ScenarioConfig parse_scenario(std::istream& in, const std::filesystem::path& base_dir = ".") {
  using detail::ptree;
  ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.line(), e.message());
  }

  const auto& schema = detail::scenario_schema();
  for (const auto& [section, body] : tree) {
    auto it = schema.find(section);
    if (it == schema.end()) {
      if (!body.data().empty()) throw ConfigError(section, "key outside any section");
      throw ConfigError(section, "unknown section");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) throw ConfigError(key, "unknown key in [" + section + "]");
      if (!value.empty()) throw ConfigError(key, "nested values are not supported");
    }
  }
  auto section = [&](const char* name) { return detail::Section(tree.get_child_optional(name).get_ptr()); };

  ScenarioConfig cfg;
  const auto scenario = section("scenario");
  if (!scenario.text("seed")) throw ConfigError("seed", "required in [scenario]");
  scenario.integer("seed", cfg.seed);
  if (auto v = scenario.text("name")) cfg.name = *v;
  if (auto v = scenario.text("output_dir")) cfg.output_dir = *v;

  const auto trace = section("trace");
  if (auto v = trace.text("source")) {
    if (*v == "synthetic") cfg.source = TraceSource::synthetic;
    else if (*v == "file") cfg.source = TraceSource::file;
    else throw ConfigError("source", "expected synthetic or file, got '" + *v + "'");
  }
  trace.integer("step_minutes", cfg.step_minutes);
  if (cfg.step_minutes <= 0 || kMinutesPerDay % cfg.step_minutes != 0)
    throw ConfigError("step_minutes", "must divide 1440");
  if (auto v = trace.text("path")) cfg.trace_path = detail::resolve(base_dir, *v);
  if (auto v = trace.text("capacities")) cfg.capacities_path = detail::resolve(base_dir, *v);
  if (cfg.source == TraceSource::file) {
    if (cfg.trace_path.empty()) throw ConfigError("path", "required when source = file");
    if (cfg.capacities_path.empty()) throw ConfigError("capacities", "required when source = file");
    if (!std::filesystem::is_regular_file(cfg.trace_path))
      throw ConfigError("path", "no such file: " + cfg.trace_path.string());
  }
  if (!cfg.capacities_path.empty() && !std::filesystem::is_regular_file(cfg.capacities_path))
    throw ConfigError("capacities", "no such file: " + cfg.capacities_path.string());

  auto& syn = cfg.synthetic;
  const auto s = section("synthetic");
  syn.seed = derive_seed(cfg.seed, "trace");
  syn.step_minutes = cfg.step_minutes;
  s.integer("num_hosts", syn.num_hosts);
  s.integer("num_days", syn.num_days);
  s.number("daily_amplitude", syn.daily_amplitude);
  s.number("base_load", syn.base_load);
  s.number("ram_base_load", syn.ram_base_load);
  s.number("noise_ar_coeff", syn.noise_ar_coeff);
  s.number("noise_sigma", syn.noise_sigma);
  s.number("spike_prob_per_step", syn.spike_prob_per_step);
  s.number("spike_magnitude", syn.spike_magnitude);
  s.number("spike_decay", syn.spike_decay);
  s.number("prediction_bias", syn.prediction_bias);
  s.number("prediction_noise_sigma", syn.prediction_noise_sigma);
  s.number("prediction_noise_ar_coeff", syn.prediction_noise_ar_coeff);
  s.integer("smoothing_window", syn.smoothing_window);
  s.integer("host_cpu_cores", syn.host_cpu_cores);
  s.number("host_ram_gb", syn.host_ram_gb);
  if (cfg.source == TraceSource::synthetic) {
    if (!cfg.capacities_path.empty()) {
      syn.capacities = load_capacities(cfg.capacities_path.string());
      if (!s.text("num_hosts")) syn.num_hosts = static_cast<int>(syn.capacities.size());
    }
    syn.validate();
  }

  const auto cost = section("cost");
  cost.number("price_per_hour", cfg.cost.price_per_hour);
  cost.number("container_cpu", cfg.cost.container_cpu);
  cost.number("container_ram_gb", cfg.cost.container_ram_gb);
  if (auto v = cost.text("tiers")) cfg.cost.discount_tiers = detail::parse_tiers(*v);
  cfg.cost.validate();

  if (auto v = section("simulation").text("attribution")) {
    if (*v == "share") cfg.attribution = PenaltyAttribution::share;
    else if (*v == "day_end") cfg.attribution = PenaltyAttribution::day_end;
    else if (*v == "marginal") cfg.attribution = PenaltyAttribution::marginal;
    else throw ConfigError("attribution", "expected share, day_end or marginal, got '" + *v + "'");
  }

  const auto d = section("ddpg");
  auto& dd = cfg.ddpg;
  d.number("alpha", dd.alpha);
  d.number("gamma", dd.gamma);
  d.integer("replay_capacity", dd.replay_capacity);
  d.integer("batch_size", dd.batch_size);
  d.integer("warmup_steps", dd.warmup_steps);
  d.number("ou_theta", dd.ou_theta);
  d.number("ou_mu", dd.ou_mu);
  d.number("ou_sigma", dd.ou_sigma);
  d.integer("target_update_days", dd.target_update_days);
  d.integer("w_state", dd.w_state);
  d.number("train_fraction", dd.train_fraction);
  d.integer("epochs", dd.epochs);
  if (auto v = d.text("critic_loss")) {
    if (*v == "mae") dd.critic_loss = CriticLoss::mae;
    else if (*v == "mse") dd.critic_loss = CriticLoss::mse;
    else throw ConfigError("critic_loss", "expected mae or mse, got '" + *v + "'");
  }
  dd.steps_per_day = steps_per_day(cfg.step_minutes);
  dd.validate();

  const auto st = section("strategies");
  if (auto v = st.text("evaluate")) {
    cfg.strategies.clear();
    for (const auto& item : detail::split_list(*v)) cfg.strategies.push_back(StrategySpec::parse(item));
    if (cfg.strategies.empty()) throw ConfigError("evaluate", "no strategies listed");
  }
  for (std::size_t i = 0; i < cfg.strategies.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (cfg.strategies[i].label() == cfg.strategies[j].label())
        throw ConfigError("evaluate", "strategy listed twice: " + cfg.strategies[i].label());
  if (auto v = st.text("baseline")) {
    cfg.baseline = StrategySpec::parse(*v).label();
    bool found = false;
    for (const auto& spec : cfg.strategies) found = found || spec.label() == cfg.baseline;
    if (!found) throw ConfigError("baseline", "'" + *v + "' is not in the evaluate list");
  }
  return cfg;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  return parse_scenario(in, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace releaser
