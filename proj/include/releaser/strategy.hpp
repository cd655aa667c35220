#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "releaser/ddpg.hpp"
#include "releaser/error.hpp"
#include "releaser/stats.hpp"
#include "releaser/trace.hpp"

namespace releaser {

/// What a strategy sees before choosing the margin for step t. Windows end
/// at t-1, oldest first, and are front-padded with zeros near the start of
/// the trace.
struct Observation {
  std::string host_id;
  MetricKind metric = MetricKind::cpu;
  std::vector<double> error_window;  ///< usage - prediction, clipped to [-1,1]
  std::vector<double> usage_window;
  double last_margin = 0.0;
};

inline double clamp_margin(double m) { return std::clamp(m, 0.0, kMaxMargin); }

class MarginStrategy {
 public:
  virtual ~MarginStrategy() = default;

  virtual std::string name() const = 0;
  virtual double select_margin(const Observation& obs) = 0;

  /// Usage samples this strategy needs in Observation::usage_window.
  virtual std::size_t usage_history() const { return 0; }

  /// Agent to feed transitions to while training; null for fixed policies.
  virtual DdpgAgent* learner() { return nullptr; }
};

class FixedStrategy final : public MarginStrategy {
 public:
  explicit FixedStrategy(double margin) : margin_(margin) {
    if (!(margin >= 0.0 && margin < 1.0)) throw DomainError("fixed margin must be in [0,1)");
  }
  std::string name() const override { return "fixed(" + detail::format_double(margin_) + ")"; }
  double select_margin(const Observation&) override { return clamp_margin(margin_); }

 private:
  double margin_;
};

/// Uniform margins in [0, 0.99), independent of what is observed.
class RandomStrategy final : public MarginStrategy {
 public:
  explicit RandomStrategy(std::uint64_t seed) : rng_(seed) {}
  std::string name() const override { return "random"; }
  double select_margin(const Observation&) override { return dist_(rng_); }

 private:
  Rng rng_;
  std::uniform_real_distribution<double> dist_{0.0, kMaxMargin};
};

/// Base margin plus the latest underestimation error.
class SimpleFeedbackStrategy final : public MarginStrategy {
 public:
  explicit SimpleFeedbackStrategy(double base = 0.05) : base_(base) {
    if (!(base >= 0.0 && base < 1.0)) throw DomainError("feedback base margin must be in [0,1)");
  }
  std::string name() const override { return "feedback(" + detail::format_double(base_) + ")"; }
  double select_margin(const Observation& obs) override {
    const double last = obs.error_window.empty() ? 0.0 : obs.error_window.back();
    return clamp_margin(base_ + std::max(0.0, last));
  }

 private:
  double base_;
};

/// Standard deviation of recent usage as the margin.
class ScavengerStrategy final : public MarginStrategy {
 public:
  explicit ScavengerStrategy(std::size_t window = 10) : window_(window) {
    if (window < 2) throw DomainError("scavenger window must be at least 2");
  }
  std::string name() const override { return "scavenger(" + std::to_string(window_) + ")"; }
  std::size_t usage_history() const override { return window_; }
  double select_margin(const Observation& obs) override {
    std::span<const double> u(obs.usage_window);
    if (u.size() > window_) u = u.last(window_);
    return clamp_margin(population_stddev(u));
  }

 private:
  std::size_t window_;
};

/// DDPG-driven margins. The agent is borrowed; with `explore` set the agent
/// acts in training mode and the simulator feeds it transitions.
class ReleaserStrategy final : public MarginStrategy {
 public:
  ReleaserStrategy(DdpgAgent& agent, bool explore) : agent_(&agent), explore_(explore) {}
  std::string name() const override { return "releaser"; }
  double select_margin(const Observation& obs) override {
    return clamp_margin(agent_->act(obs.error_window, explore_));
  }
  DdpgAgent* learner() override { return explore_ ? agent_ : nullptr; }

 private:
  DdpgAgent* agent_;
  bool explore_;
};

enum class StrategyKind { fixed, random, feedback, scavenger, releaser };

/// Declarative strategy choice as it appears in a scenario file.
struct StrategySpec {
  StrategyKind kind = StrategyKind::fixed;
  double parameter = 0.05;  ///< margin, base margin, or scavenger window

  std::string label() const {
    switch (kind) {
      case StrategyKind::fixed: return "fixed(" + detail::format_double(parameter) + ")";
      case StrategyKind::random: return "random";
      case StrategyKind::feedback: return "feedback(" + detail::format_double(parameter) + ")";
      case StrategyKind::scavenger: return "scavenger(" + std::to_string(static_cast<long long>(parameter)) + ")";
      case StrategyKind::releaser: return "releaser";
    }
    return "unknown";
  }

  /// Parses `fixed:0.05`, `random`, `feedback[:base]`, `scavenger[:window]`, `releaser`.
  static StrategySpec parse(std::string_view text, std::size_t default_window = 10) {
    auto colon = text.find(':');
    const std::string_view head = text.substr(0, colon);
    const bool has_arg = colon != std::string_view::npos;
    double arg = 0.0;
    if (has_arg && !detail::parse_number(text.substr(colon + 1), arg))
      throw ConfigError("strategies", "bad parameter in '" + std::string(text) + "'");
    StrategySpec s;
    if (head == "fixed") {
      s = {StrategyKind::fixed, has_arg ? arg : 0.05};
      if (!(s.parameter >= 0.0 && s.parameter < 1.0)) throw ConfigError("strategies", "fixed margin must be in [0,1)");
    } else if (head == "random") {
      s = {StrategyKind::random, 0.0};
    } else if (head == "feedback") {
      s = {StrategyKind::feedback, has_arg ? arg : 0.05};
      if (!(s.parameter >= 0.0 && s.parameter < 1.0)) throw ConfigError("strategies", "feedback base must be in [0,1)");
    } else if (head == "scavenger") {
      s = {StrategyKind::scavenger, has_arg ? arg : static_cast<double>(default_window)};
      if (s.parameter < 2.0 || s.parameter != std::floor(s.parameter))
        throw ConfigError("strategies", "scavenger window must be an integer >= 2");
    } else if (head == "releaser") {
      s = {StrategyKind::releaser, 0.0};
    } else {
      throw ConfigError("strategies", "unknown strategy '" + std::string(text) + "'");
    }
    if (has_arg && (s.kind == StrategyKind::random || s.kind == StrategyKind::releaser))
      throw ConfigError("strategies", std::string(head) + " takes no parameter");
    return s;
  }
};

/// Builds the instance that serves `metric`. Releaser needs the metric's
/// agent; random draws its stream from the named sub-seed "random.<metric>".
inline std::unique_ptr<MarginStrategy> make_strategy(const StrategySpec& spec, MetricKind metric,
                                                     std::uint64_t global_seed, DdpgAgent* agent = nullptr,
                                                     bool explore = false) {
  switch (spec.kind) {
    case StrategyKind::fixed: return std::make_unique<FixedStrategy>(spec.parameter);
    case StrategyKind::random:
      return std::make_unique<RandomStrategy>(derive_seed(global_seed, "random." + std::string(to_string(metric))));
    case StrategyKind::feedback: return std::make_unique<SimpleFeedbackStrategy>(spec.parameter);
    case StrategyKind::scavenger:
      return std::make_unique<ScavengerStrategy>(static_cast<std::size_t>(spec.parameter));
    case StrategyKind::releaser:
      if (!agent) throw ConfigError("strategies", "releaser needs a trained agent for " + std::string(to_string(metric)));
      return std::make_unique<ReleaserStrategy>(*agent, explore);
  }
  throw ConfigError("strategies", "unknown strategy kind");
}

}  // namespace releaser
