#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "releaser/error.hpp"
#include "releaser/seed.hpp"

namespace releaser {

enum class MetricKind { cpu = 0, ram = 1 };

inline constexpr std::array<MetricKind, 2> kMetrics{MetricKind::cpu, MetricKind::ram};

inline std::string_view to_string(MetricKind m) { return m == MetricKind::cpu ? "cpu" : "ram"; }

inline bool parse_metric(std::string_view text, MetricKind& out) {
  if (text == "cpu") {
    out = MetricKind::cpu;
    return true;
  }
  if (text == "ram") {
    out = MetricKind::ram;
    return true;
  }
  return false;
}

inline constexpr int kMinutesPerDay = 1440;

/// Steps in one day for a step length in minutes; the length must divide a day.
inline int steps_per_day(int step_minutes) {
  if (step_minutes <= 0 || kMinutesPerDay % step_minutes != 0)
    throw DomainError("step length of " + std::to_string(step_minutes) +
                      " minutes does not divide a day");
  return kMinutesPerDay / step_minutes;
}

/// One observation of a metric. Usage and prediction are fractions of host capacity.
struct TraceSample {
  std::int64_t step_index = 0;
  double usage = 0.0;
  double prediction = 0.0;

  double error() const { return usage - prediction; }
  bool operator==(const TraceSample&) const = default;
};

struct HostSpec {
  std::string host_id;
  int cpu_cores = 1;
  double ram_gb = 1.0;

  void validate() const {
    if (host_id.empty()) throw ConfigError("host_id", "must not be empty");
    if (cpu_cores < 1) throw ConfigError("cpu_cores", "host " + host_id + " needs at least one core");
    if (!(ram_gb > 0.0) || !std::isfinite(ram_gb))
      throw ConfigError("ram_gb", "host " + host_id + " needs positive RAM");
  }
  bool operator==(const HostSpec&) const = default;
};

struct HostTrace {
  HostSpec spec;
  std::array<std::vector<TraceSample>, 2> series;

  const std::vector<TraceSample>& of(MetricKind m) const { return series[static_cast<int>(m)]; }
  std::vector<TraceSample>& of(MetricKind m) { return series[static_cast<int>(m)]; }
  std::size_t length() const { return series[0].size(); }

  /// Throws SchemaError unless both series are equal, contiguous from 0, in
  /// range, and a whole number of days long.
  void validate(int step_minutes) const {
    const auto spd = static_cast<std::size_t>(steps_per_day(step_minutes));
    for (MetricKind m : kMetrics) {
      const auto& s = of(m);
      if (s.empty())
        throw SchemaError("host " + spec.host_id + " has no " + std::string(to_string(m)) + " series");
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i].step_index != static_cast<std::int64_t>(i))
          throw SchemaError("host " + spec.host_id + " " + std::string(to_string(m)) +
                            " steps are not contiguous at index " + std::to_string(i));
        if (!(s[i].usage >= 0.0 && s[i].usage <= 1.0 && s[i].prediction >= 0.0 && s[i].prediction <= 1.0))
          throw SchemaError("host " + spec.host_id + " has a sample outside [0,1]");
      }
    }
    if (of(MetricKind::cpu).size() != of(MetricKind::ram).size())
      throw SchemaError("host " + spec.host_id + " has ragged series: cpu " +
                        std::to_string(of(MetricKind::cpu).size()) + " vs ram " +
                        std::to_string(of(MetricKind::ram).size()));
    if (length() % spd != 0)
      throw SchemaError("host " + spec.host_id + " series length " + std::to_string(length()) +
                        " is not a whole number of days");
  }

  bool operator==(const HostTrace&) const = default;
};

struct Datacenter {
  std::string name;
  int step_minutes = 3;
  std::vector<HostTrace> hosts;

  int steps_per_day() const { return releaser::steps_per_day(step_minutes); }
  std::size_t num_steps() const { return hosts.empty() ? 0 : hosts.front().length(); }
  int num_days() const { return static_cast<int>(num_steps() / static_cast<std::size_t>(steps_per_day())); }

  void validate() const {
    std::set<std::string> ids;
    for (const auto& h : hosts) {
      h.spec.validate();
      h.validate(step_minutes);
      if (!ids.insert(h.spec.host_id).second) throw SchemaError("duplicate host_id " + h.spec.host_id);
      if (h.length() != num_steps())
        throw SchemaError("host " + h.spec.host_id + " length differs from the rest of the datacenter");
    }
  }

  bool operator==(const Datacenter&) const = default;
};

using CapacityMap = std::map<std::string, HostSpec>;

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc() || ptr != text.data() + text.size()) return false;
  if constexpr (std::is_floating_point_v<T>) return std::isfinite(out);
  return true;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("path", "cannot open " + path);
  return in;
}

}  // namespace detail

/// Reads `host_id,cpu_cores,ram_gb` rows (header required).
inline CapacityMap parse_capacities(std::istream& in) {
  CapacityMap out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = detail::trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!header) {
      if (view != "host_id,cpu_cores,ram_gb") throw ParseError(lineno, "expected header host_id,cpu_cores,ram_gb");
      header = true;
      continue;
    }
    auto cols = detail::split_csv(view);
    if (cols.size() != 3) throw ParseError(lineno, "expected 3 columns, got " + std::to_string(cols.size()));
    HostSpec spec;
    spec.host_id = std::string(detail::trim(cols[0]));
    if (!detail::parse_number(cols[1], spec.cpu_cores)) throw ParseError(lineno, "cpu_cores is not an integer");
    if (!detail::parse_number(cols[2], spec.ram_gb)) throw ParseError(lineno, "ram_gb is not a number");
    try {
      spec.validate();
    } catch (const ConfigError& e) {
      throw ParseError(lineno, e.what());
    }
    if (!out.emplace(spec.host_id, spec).second) throw ParseError(lineno, "duplicate host_id " + spec.host_id);
  }
  if (!header) throw ParseError(lineno, "missing header");
  return out;
}

inline CapacityMap load_capacities(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_capacities(in);
}

inline void write_capacities(std::ostream& out, const Datacenter& dc) {
  out << "host_id,cpu_cores,ram_gb\n";
  for (const auto& h : dc.hosts)
    out << h.spec.host_id << ',' << h.spec.cpu_cores << ',' << detail::format_double(h.spec.ram_gb) << '\n';
}

/// Parses the `host_id,metric,step,usage,prediction` trace schema. Rows may
/// come in any order; hosts end up sorted by id and series by step.
inline Datacenter parse_traces(std::istream& in, const CapacityMap& capacities, int step_minutes,
                               std::string name = "trace") {
  steps_per_day(step_minutes);
  struct Row {
    std::string host;
    MetricKind metric;
    std::int64_t step;
    double usage;
    double prediction;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = detail::trim(line);
    if (view.empty()) continue;
    if (!header) {
      if (view != "host_id,metric,step,usage,prediction")
        throw ParseError(lineno, "expected header host_id,metric,step,usage,prediction");
      header = true;
      continue;
    }
    auto cols = detail::split_csv(view);
    if (cols.size() != 5) throw ParseError(lineno, "expected 5 columns, got " + std::to_string(cols.size()));
    Row r;
    r.line = lineno;
    r.host = std::string(detail::trim(cols[0]));
    if (r.host.empty()) throw ParseError(lineno, "empty host_id");
    if (!parse_metric(detail::trim(cols[1]), r.metric)) throw ParseError(lineno, "metric must be cpu or ram");
    if (!detail::parse_number(cols[2], r.step) || r.step < 0)
      throw ParseError(lineno, "step must be a non-negative integer");
    if (!detail::parse_number(cols[3], r.usage)) throw ParseError(lineno, "usage is not a number");
    if (!detail::parse_number(cols[4], r.prediction)) throw ParseError(lineno, "prediction is not a number");
    if (r.usage < 0.0 || r.usage > 1.0) throw ParseError(lineno, "usage outside [0,1]");
    if (r.prediction < 0.0 || r.prediction > 1.0) throw ParseError(lineno, "prediction outside [0,1]");
    rows.push_back(std::move(r));
  }
  if (!header) throw ParseError(lineno, "missing header");

  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.host, a.metric, a.step) < std::tie(b.host, b.metric, b.step);
  });

  Datacenter dc;
  dc.name = std::move(name);
  dc.step_minutes = step_minutes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    if (i > 0 && rows[i - 1].host == r.host && rows[i - 1].metric == r.metric && rows[i - 1].step == r.step)
      throw SchemaError("duplicate row for host " + r.host + " metric " + std::string(to_string(r.metric)) +
                        " step " + std::to_string(r.step) + " (line " + std::to_string(r.line) + ")");
    if (dc.hosts.empty() || dc.hosts.back().spec.host_id != r.host) {
      auto it = capacities.find(r.host);
      if (it == capacities.end()) throw ConfigError("capacities", "no capacity entry for host " + r.host);
      HostTrace h;
      h.spec = it->second;
      dc.hosts.push_back(std::move(h));
    }
    dc.hosts.back().of(r.metric).push_back(TraceSample{r.step, r.usage, r.prediction});
  }
  if (dc.hosts.empty()) throw SchemaError("trace contains no rows");
  dc.validate();
  return dc;
}

inline Datacenter load_traces(const std::string& path, const CapacityMap& capacities, int step_minutes) {
  auto in = detail::open_input(path);
  return parse_traces(in, capacities, step_minutes, path);
}

inline void write_traces(std::ostream& out, const Datacenter& dc) {
  out << "host_id,metric,step,usage,prediction\n";
  for (const auto& h : dc.hosts)
    for (MetricKind m : kMetrics)
      for (const auto& s : h.of(m))
        out << h.spec.host_id << ',' << to_string(m) << ',' << s.step_index << ','
            << detail::format_double(s.usage) << ',' << detail::format_double(s.prediction) << '\n';
}

/// Parameters of the synthetic workload generator.
struct SyntheticConfig {
  std::uint64_t seed = 0;
  int num_hosts = 5;
  int num_days = 30;
  int step_minutes = 3;
  double daily_amplitude = 0.15;
  double base_load = 0.3;
  double ram_base_load = -1.0;  ///< negative: same as base_load
  double noise_ar_coeff = 0.9;
  double noise_sigma = 0.01;
  double spike_prob_per_step = 0.0;
  double spike_magnitude = 0.0;
  double spike_decay = 0.7;
  double prediction_bias = 0.0;
  double prediction_noise_sigma = 0.05;
  /// AR(1) coefficient of the forecast noise; its stationary stddev stays
  /// prediction_noise_sigma. 0 gives independent noise per step.
  double prediction_noise_ar_coeff = 0.0;
  int smoothing_window = 10;
  int host_cpu_cores = 24;
  double host_ram_gb = 128.0;
  /// When non-empty, host ids and capacities are taken from here and
  /// num_hosts must match its size.
  CapacityMap capacities;

  void validate() const {
    auto fraction = [](const char* field, double v) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(field, "must be in [0,1]");
    };
    if (num_hosts < 1) throw ConfigError("num_hosts", "must be positive");
    if (num_days < 1) throw ConfigError("num_days", "must be positive");
    if (step_minutes <= 0 || kMinutesPerDay % step_minutes != 0)
      throw ConfigError("step_minutes", "must divide 1440");
    fraction("daily_amplitude", daily_amplitude);
    fraction("base_load", base_load);
    if (ram_base_load >= 0.0) fraction("ram_base_load", ram_base_load);
    if (!(noise_ar_coeff >= 0.0 && noise_ar_coeff < 1.0)) throw ConfigError("noise_ar_coeff", "must be in [0,1)");
    fraction("noise_sigma", noise_sigma);
    fraction("spike_prob_per_step", spike_prob_per_step);
    fraction("spike_magnitude", spike_magnitude);
    if (!(spike_decay >= 0.0 && spike_decay < 1.0)) throw ConfigError("spike_decay", "must be in [0,1)");
    if (!(prediction_bias >= -1.0 && prediction_bias <= 1.0)) throw ConfigError("prediction_bias", "must be in [-1,1]");
    fraction("prediction_noise_sigma", prediction_noise_sigma);
    if (!(prediction_noise_ar_coeff >= 0.0 && prediction_noise_ar_coeff < 1.0))
      throw ConfigError("prediction_noise_ar_coeff", "must be in [0,1)");
    if (smoothing_window < 1) throw ConfigError("smoothing_window", "must be positive");
    if (capacities.empty()) {
      if (host_cpu_cores < 1) throw ConfigError("host_cpu_cores", "must be positive");
      if (!(host_ram_gb > 0.0)) throw ConfigError("host_ram_gb", "must be positive");
    } else if (static_cast<int>(capacities.size()) != num_hosts) {
      throw ConfigError("num_hosts", "does not match the capacity file (" + std::to_string(capacities.size()) +
                                         " hosts)");
    }
  }
};

/// Deterministic synthetic datacenter. Usage is a daily sinusoid with a
/// per-host phase, AR(1) noise and decaying spikes; prediction is a trailing
/// moving average of usage plus bias and gaussian noise. Both are clamped to
/// [0,1].
inline Datacenter generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const int spd = steps_per_day(cfg.step_minutes);
  const std::size_t n = static_cast<std::size_t>(spd) * static_cast<std::size_t>(cfg.num_days);

  std::vector<HostSpec> specs;
  if (cfg.capacities.empty()) {
    const int width = std::max<int>(2, static_cast<int>(std::to_string(cfg.num_hosts - 1).size()));
    for (int h = 0; h < cfg.num_hosts; ++h) {
      std::string id = std::to_string(h);
      id.insert(0, static_cast<std::size_t>(width) - id.size(), '0');
      specs.push_back(HostSpec{"h" + id, cfg.host_cpu_cores, cfg.host_ram_gb});
    }
  } else {
    for (const auto& [id, spec] : cfg.capacities) specs.push_back(spec);
  }

  Datacenter dc;
  dc.name = "synthetic";
  dc.step_minutes = cfg.step_minutes;
  for (std::size_t h = 0; h < specs.size(); ++h) {
    HostTrace trace;
    trace.spec = specs[h];
    Rng phase_rng(derive_seed(cfg.seed, "synthetic.phase", h));
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(phase_rng);

    for (MetricKind m : kMetrics) {
      Rng rng(derive_seed(cfg.seed, m == MetricKind::cpu ? "synthetic.cpu" : "synthetic.ram", h));
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const double base = (m == MetricKind::ram && cfg.ram_base_load >= 0.0) ? cfg.ram_base_load : cfg.base_load;

      std::vector<double> usage(n);
      double ar = 0.0;
      double spike = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        ar = cfg.noise_ar_coeff * ar + cfg.noise_sigma * gauss(rng);
        spike *= cfg.spike_decay;
        if (unit(rng) < cfg.spike_prob_per_step) spike += cfg.spike_magnitude;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(t % static_cast<std::size_t>(spd)) / spd;
        usage[t] = std::clamp(base + cfg.daily_amplitude * std::sin(angle + phase) + ar + spike, 0.0, 1.0);
      }

      auto& series = trace.of(m);
      series.reserve(n);
      double window_sum = 0.0;
      const auto w = static_cast<std::size_t>(cfg.smoothing_window);
      const double rho = cfg.prediction_noise_ar_coeff;
      const double innovation = std::sqrt(1.0 - rho * rho);
      double forecast_noise = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        window_sum += usage[t];
        if (t >= w) window_sum -= usage[t - w];
        const double smoothed = window_sum / static_cast<double>(std::min(t + 1, w));
        const double z = gauss(rng);
        forecast_noise = t == 0 ? z : rho * forecast_noise + innovation * z;
        const double p =
            std::clamp(smoothed + cfg.prediction_bias + cfg.prediction_noise_sigma * forecast_noise, 0.0, 1.0);
        series.push_back(TraceSample{static_cast<std::int64_t>(t), usage[t], p});
      }
    }
    dc.hosts.push_back(std::move(trace));
  }
  return dc;
}

struct CdfPoint {
  double error = 0.0;
  double probability = 0.0;
  bool operator==(const CdfPoint&) const = default;
};

struct HostCdf {
  std::string host_id;
  std::vector<CdfPoint> points;
};

/// Empirical CDF of underestimation errors (usage - prediction > 0) over
/// the given samples. Empty when no sample underestimates.
inline std::vector<CdfPoint> underestimation_cdf(std::vector<double> positive_errors) {
  std::erase_if(positive_errors, [](double e) { return !(e > 0.0); });
  std::sort(positive_errors.begin(), positive_errors.end());
  std::vector<CdfPoint> out;
  const double total = static_cast<double>(positive_errors.size());
  for (std::size_t i = 0; i < positive_errors.size(); ++i) {
    if (i + 1 < positive_errors.size() && positive_errors[i + 1] == positive_errors[i]) continue;
    out.push_back(CdfPoint{positive_errors[i], static_cast<double>(i + 1) / total});
  }
  return out;
}

/// Per-host error CDFs over the whole trace, or over steps [first, last) when given.
inline std::vector<HostCdf> error_cdf(const Datacenter& dc, MetricKind metric, std::size_t first = 0,
                                      std::size_t last = static_cast<std::size_t>(-1)) {
  if (dc.hosts.empty()) throw DomainError("error_cdf needs a nonempty datacenter");
  std::vector<HostCdf> out;
  for (const auto& h : dc.hosts) {
    const auto& s = h.of(metric);
    const std::size_t end = std::min(last, s.size());
    std::vector<double> errors;
    for (std::size_t t = first; t < end; ++t) errors.push_back(s[t].error());
    out.push_back(HostCdf{h.spec.host_id, underestimation_cdf(std::move(errors))});
  }
  return out;
}

}  // namespace releaser
