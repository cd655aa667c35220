#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "releaser/error.hpp"
#include "releaser/simulator.hpp"

namespace releaser {

namespace detail {

/// Fixed-point text with `digits` decimals; "-0.0000" is printed as "0.0000".
inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

/// Money in reports is rounded to 4 decimals.
inline double round4(double v) { return std::round(v * 1e4) / 1e4; }

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
template <class Fn>
void write_atomically(const std::filesystem::path& path, Fn&& fill) {
  auto tmp = path;
  tmp += ".tmp";
  {
    auto out = open_output(tmp);
    fill(out);
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw Error("failed writing " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

// --- CSV -------------------------------------------------------------------

inline void write_ledger_csv(std::ostream& out, const EvaluationReport& r) {
  out << "host,day,violation_min,potential,penalty,net\n";
  for (const auto& h : r.hosts)
    for (const auto& d : h.days)
      out << d.host_id << ',' << d.day_index << ',' << detail::fixed(d.violation_minutes, 0) << ','
          << detail::fixed(d.potential_saving) << ',' << detail::fixed(d.penalty) << ','
          << detail::fixed(d.net_saving) << '\n';
}

inline void write_margins_csv(std::ostream& out, const EvaluationReport& r) {
  out << "host,metric,step,margin\n";
  for (const auto& h : r.hosts)
    for (MetricKind m : kMetrics) {
      const auto& v = h.margins[static_cast<int>(m)];
      for (std::size_t i = 0; i < v.size(); ++i)
        out << h.host_id << ',' << to_string(m) << ',' << r.first_step + static_cast<std::int64_t>(i) << ','
            << detail::fixed(v[i], 6) << '\n';
    }
}

inline void write_cdf_csv(std::ostream& out, const EvaluationReport& r, MetricKind m) {
  out << "host,error,probability\n";
  for (const auto& h : r.error_cdfs[static_cast<int>(m)])
    for (const auto& p : h.points)
      out << h.host_id << ',' << detail::fixed(p.error, 6) << ',' << detail::fixed(p.probability, 6) << '\n';
}

/// One row per training step; critic_mae is empty before the first update.
inline void write_training_log_csv(std::ostream& out, const std::vector<TrainingLogRow>& rows) {
  out << "step,critic_mae,mean_reward,mean_margin\n";
  for (const auto& row : rows)
    out << row.step << ',' << (std::isnan(row.critic_mae) ? std::string() : detail::fixed(row.critic_mae, 6))
        << ',' << detail::fixed(row.mean_reward, 6) << ',' << detail::fixed(row.mean_margin, 6) << '\n';
}

// --- JSON ------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const MoneyTotals& t) {
  return {{"violation_min", t.violation_minutes},
          {"potential", detail::round4(t.potential_saving)},
          {"penalty", detail::round4(t.penalty)},
          {"net", detail::round4(t.net_saving)}};
}

inline nlohmann::ordered_json to_json(const DistributionSummary& s) {
  return {{"min", s.min},       {"q1", s.q1},   {"median", s.median}, {"p75", s.q3},
          {"max", s.max},       {"outliers", s.outliers}};
}

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["strategy"] = r.strategy;
  j["days"] = {{"first", r.days.first}, {"last", r.days.last}};
  j["step_minutes"] = r.step_minutes;
  j["datacenter"] = to_json(r.datacenter);
  auto hosts = nlohmann::ordered_json::array();
  for (const auto& h : r.hosts) {
    nlohmann::ordered_json hj;
    hj["host"] = h.host_id;
    hj["totals"] = to_json(h.totals);
    auto days = nlohmann::ordered_json::array();
    for (const auto& d : h.days)
      days.push_back({{"day", d.day_index},
                      {"violation_min", d.violation_minutes},
                      {"potential", detail::round4(d.potential_saving)},
                      {"penalty", detail::round4(d.penalty)},
                      {"net", detail::round4(d.net_saving)}});
    hj["days"] = std::move(days);
    for (MetricKind m : kMetrics) hj["margins"][std::string(to_string(m))] = to_json(h.margin_summary[static_cast<int>(m)]);
    hosts.push_back(std::move(hj));
  }
  j["hosts"] = std::move(hosts);
  for (MetricKind m : kMetrics) {
    auto cdfs = nlohmann::ordered_json::object();
    for (const auto& c : r.error_cdfs[static_cast<int>(m)]) {
      auto pts = nlohmann::ordered_json::array();
      for (const auto& p : c.points) pts.push_back({p.error, p.probability});
      cdfs[c.host_id] = std::move(pts);
    }
    j["error_cdf"][std::string(to_string(m))] = std::move(cdfs);
  }
  return j;
}

inline nlohmann::ordered_json to_json(const Comparison& c) {
  nlohmann::ordered_json j;
  j["baseline"] = c.baseline;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : c.rows) {
    auto rj = to_json(row.totals);
    rj["strategy"] = row.strategy;
    rj["net_ratio"] = std::isfinite(row.net_ratio) ? nlohmann::ordered_json(row.net_ratio) : nullptr;
    rj["penalty_ratio"] = std::isfinite(row.penalty_ratio) ? nlohmann::ordered_json(row.penalty_ratio) : nullptr;
    rows.push_back(std::move(rj));
  }
  j["strategies"] = std::move(rows);
  return j;
}

// --- files -----------------------------------------------------------------

/// Directory-safe form of a strategy label: "fixed(0.05)" -> "fixed_0.05".
inline std::string strategy_slug(std::string_view label) {
  std::string s;
  for (char c : label) {
    if (c == '(' || c == '/' || c == ':') s += '_';
    else if (c != ')') s += c;
  }
  return s;
}

/// report.json, ledger.csv, margins.csv and cdf_<metric>.csv under `dir`.
inline void write_report_files(const std::filesystem::path& dir, const EvaluationReport& r) {
  std::filesystem::create_directories(dir);
  detail::write_atomically(dir / "report.json", [&](std::ostream& o) { o << to_json(r).dump(2) << '\n'; });
  detail::write_atomically(dir / "ledger.csv", [&](std::ostream& o) { write_ledger_csv(o, r); });
  detail::write_atomically(dir / "margins.csv", [&](std::ostream& o) { write_margins_csv(o, r); });
  for (MetricKind m : kMetrics)
    detail::write_atomically(dir / ("cdf_" + std::string(to_string(m)) + ".csv"),
                             [&](std::ostream& o) { write_cdf_csv(o, r, m); });
}

inline void write_comparison_csv(std::ostream& out, const Comparison& c) {
  out << "strategy,violation_min,potential,penalty,net,net_ratio,penalty_ratio\n";
  for (const auto& row : c.rows)
    out << row.strategy << ',' << detail::fixed(row.totals.violation_minutes, 0) << ','
        << detail::fixed(row.totals.potential_saving) << ',' << detail::fixed(row.totals.penalty) << ','
        << detail::fixed(row.totals.net_saving) << ',' << detail::fixed(row.net_ratio) << ','
        << detail::fixed(row.penalty_ratio) << '\n';
}

/// Aligned console table; potential = net + penalty for every row.
inline void print_comparison(std::ostream& out, const Comparison& c) {
  std::size_t width = 8;
  for (const auto& row : c.rows) width = std::max(width, row.strategy.size());
  out << std::left << std::setw(static_cast<int>(width)) << "strategy" << std::right;
  for (const char* h : {"potential", "penalty", "net", "viol_min"}) out << std::setw(13) << h;
  out << std::setw(12) << "net/base" << std::setw(12) << "pen/base" << '\n';
  for (const auto& row : c.rows) {
    out << std::left << std::setw(static_cast<int>(width)) << row.strategy << std::right << std::setw(13)
        << detail::fixed(row.totals.potential_saving) << std::setw(13) << detail::fixed(row.totals.penalty)
        << std::setw(13) << detail::fixed(row.totals.net_saving) << std::setw(13)
        << detail::fixed(row.totals.violation_minutes, 0) << std::setw(12) << detail::fixed(row.net_ratio, 3)
        << std::setw(12) << detail::fixed(row.penalty_ratio, 3) << '\n';
  }
  out << "baseline: " << c.baseline << '\n';
}

}  // namespace releaser
