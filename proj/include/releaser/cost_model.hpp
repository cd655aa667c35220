#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "releaser/error.hpp"
#include "releaser/trace.hpp"

namespace releaser {

/// Violation-duration tier: (lower, upper] minutes map to `discount`.
struct DiscountTier {
  double lower_minutes = 0.0;
  double upper_minutes = std::numeric_limits<double>::infinity();
  double discount = 0.0;
  bool operator==(const DiscountTier&) const = default;
};

/// Delay-dependent penalty schedule for a 24h day.
inline std::vector<DiscountTier> default_discount_tiers() {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return {{0.0, 15.0, 0.0}, {15.0, 120.0, 0.10}, {120.0, 720.0, 0.15}, {720.0, inf, 0.30}};
}

/// Container leasing, pricing and SLA penalty model.
struct CostModel {
  double container_cpu = 2.0;
  double container_ram_gb = 8.0;
  double price_per_hour = 0.0317;
  std::vector<DiscountTier> discount_tiers = default_discount_tiers();

  double price_per_minute() const { return price_per_hour / 60.0; }

  double max_discount() const { return discount_tiers.empty() ? 0.0 : discount_tiers.back().discount; }

  void validate() const {
    if (!(container_cpu > 0.0)) throw ConfigError("container_cpu", "must be positive");
    if (!(container_ram_gb > 0.0)) throw ConfigError("container_ram_gb", "must be positive");
    if (!(price_per_hour >= 0.0) || !std::isfinite(price_per_hour))
      throw ConfigError("price_per_hour", "must be a non-negative number");
    if (discount_tiers.empty()) throw ConfigError("tiers", "at least one tier is required");
    if (discount_tiers.front().lower_minutes != 0.0) throw ConfigError("tiers", "first tier must start at 0");
    if (discount_tiers.back().upper_minutes != std::numeric_limits<double>::infinity())
      throw ConfigError("tiers", "last tier must be unbounded");
    for (std::size_t i = 0; i < discount_tiers.size(); ++i) {
      const auto& t = discount_tiers[i];
      if (!(t.upper_minutes > t.lower_minutes)) throw ConfigError("tiers", "tier bounds must increase");
      if (!(t.discount >= 0.0 && t.discount <= 1.0)) throw ConfigError("tiers", "discount must be in [0,1]");
      if (i > 0) {
        if (t.lower_minutes != discount_tiers[i - 1].upper_minutes)
          throw ConfigError("tiers", "tiers must be contiguous");
        if (t.discount < discount_tiers[i - 1].discount)
          throw ConfigError("tiers", "discounts must be non-decreasing");
      }
    }
  }
};

/// Discount applied to a day's revenue for the given cumulative violation time.
/// The first tier also covers exactly 0 minutes.
inline double discount_for(const CostModel& model, double violation_minutes) {
  if (!(violation_minutes >= 0.0 && violation_minutes <= kMinutesPerDay))
    throw DomainError("violation minutes must lie in [0,1440], got " + std::to_string(violation_minutes));
  for (const auto& tier : model.discount_tiers)
    if (violation_minutes <= tier.upper_minutes) return tier.discount;
  return model.max_discount();
}

/// How many containers fit in the offered headroom of a host.
inline int containers_fitting(const CostModel& model, const HostSpec& spec, double headroom_cpu, double headroom_ram) {
  headroom_cpu = std::clamp(headroom_cpu, 0.0, 1.0);
  headroom_ram = std::clamp(headroom_ram, 0.0, 1.0);
  const double by_cpu = std::floor(headroom_cpu * spec.cpu_cores / model.container_cpu);
  const double by_ram = std::floor(headroom_ram * spec.ram_gb / model.container_ram_gb);
  return std::max(0, static_cast<int>(std::min(by_cpu, by_ram)));
}

/// Money side of a host-day.
struct Settlement {
  double potential_saving = 0.0;
  double penalty = 0.0;
  double net_saving = 0.0;
  bool operator==(const Settlement&) const = default;
};

/// Revenue for one step of `containers` hosted containers.
inline double step_revenue(const CostModel& model, int containers, int step_minutes) {
  return containers * model.price_per_minute() * step_minutes;
}

/// Settles one host-day: revenue summed step by step, then the tier discount.
inline Settlement settle_day(const CostModel& model, std::span<const int> per_step_containers,
                             double violation_minutes, int step_minutes) {
  const int spd = steps_per_day(step_minutes);
  if (static_cast<int>(per_step_containers.size()) != spd)
    throw DomainError("settle_day expects " + std::to_string(spd) + " steps, got " +
                      std::to_string(per_step_containers.size()));
  Settlement s;
  for (int nb : per_step_containers) s.potential_saving += step_revenue(model, nb, step_minutes);
  s.penalty = s.potential_saving * discount_for(model, violation_minutes);
  s.net_saving = s.potential_saving - s.penalty;
  return s;
}

inline double accumulate_violation(double violation_minutes, bool violated_this_step, int step_minutes) {
  return violated_this_step ? violation_minutes + step_minutes : violation_minutes;
}

/// Financial record of one host over one day.
struct DayLedger {
  std::string host_id;
  int day_index = 0;
  double violation_minutes = 0.0;
  double potential_saving = 0.0;
  double penalty = 0.0;
  double net_saving = 0.0;
  std::vector<int> per_step_containers;
  bool operator==(const DayLedger&) const = default;
};

}  // namespace releaser
