#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "releaser/error.hpp"

namespace releaser {

/// Nearest-rank percentile of already sorted values, p in [0,100].
/// p = 0 yields the minimum.
inline double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("percentile of an empty sample");
  if (!(p >= 0.0 && p <= 100.0)) throw DomainError("percentile must be in [0,100]");
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

/// Box-plot style summary: min, quartiles by nearest rank, and the values
/// outside [q1 - 1.5 IQR, q3 + 1.5 IQR].
struct DistributionSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::vector<double> outliers;
  bool operator==(const DistributionSummary&) const = default;
};

inline DistributionSummary summarize(std::vector<double> values) {
  if (values.empty()) return {};
  std::sort(values.begin(), values.end());
  DistributionSummary s;
  s.min = values.front();
  s.max = values.back();
  s.q1 = nearest_rank(values, 25.0);
  s.median = nearest_rank(values, 50.0);
  s.q3 = nearest_rank(values, 75.0);
  const double iqr = s.q3 - s.q1;
  const double lo = s.q1 - 1.5 * iqr;
  const double hi = s.q3 + 1.5 * iqr;
  for (double v : values)
    if (v < lo || v > hi) s.outliers.push_back(v);
  // keep the list readable for long runs: distinct values only
  s.outliers.erase(std::unique(s.outliers.begin(), s.outliers.end()), s.outliers.end());
  return s;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

/// Population standard deviation.
inline double population_stddev(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace releaser
