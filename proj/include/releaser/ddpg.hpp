#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "releaser/error.hpp"
#include "releaser/neuralnet.hpp"
#include "releaser/seed.hpp"

namespace releaser {

inline constexpr double kMaxMargin = 0.99;

enum class CriticLoss { mae, mse };

struct DdpgConfig {
  double alpha = 0.001;
  double gamma = 0.99;
  std::size_t replay_capacity = 100000;
  std::size_t batch_size = 128;
  std::size_t warmup_steps = 1000;
  double ou_theta = 0.15;
  double ou_mu = 0.0;
  double ou_sigma = 0.3;
  int target_update_days = 10;
  int w_state = 10;
  double train_fraction = 0.8;
  int steps_per_day = 480;
  CriticLoss critic_loss = CriticLoss::mae;
  /// Passes over the training split.
  int epochs = 1;

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("alpha", "must be positive");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma", "must be in [0,1]");
    if (replay_capacity < 1) throw ConfigError("replay_capacity", "must be positive");
    if (batch_size < 1) throw ConfigError("batch_size", "must be positive");
    if (!(ou_theta > 0.0 && ou_theta <= 1.0)) throw ConfigError("ou_theta", "must be in (0,1]");
    if (!(ou_sigma >= 0.0)) throw ConfigError("ou_sigma", "must be non-negative");
    if (!std::isfinite(ou_mu)) throw ConfigError("ou_mu", "must be finite");
    if (target_update_days < 1) throw ConfigError("target_update_days", "must be positive");
    if (w_state < 1) throw ConfigError("w_state", "must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction", "must be in (0,1)");
    if (steps_per_day < 1) throw ConfigError("steps_per_day", "must be positive");
    if (epochs < 1) throw ConfigError("epochs", "must be positive");
  }
};

struct Transition {
  std::vector<double> state;
  double action = 0.0;
  double reward = 0.0;  ///< dollars
  std::vector<double> next_state;

  bool finite() const {
    auto ok = [](double v) { return std::isfinite(v); };
    return std::all_of(state.begin(), state.end(), ok) && std::all_of(next_state.begin(), next_state.end(), ok) &&
           std::isfinite(action) && std::isfinite(reward);
  }
};

/// Fixed-capacity ring of transitions with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
    if (capacity == 0) throw DomainError("replay capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::vector<const Transition*> sample(std::size_t n) {
    if (items_.empty()) throw DomainError("cannot sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<const Transition*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[pick(rng_)]);
    return out;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<Transition>& contents() const { return items_; }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
  Rng rng_;
};

/// Mean-reverting exploration noise, unit time step.
class OuProcess {
 public:
  OuProcess(double theta, double mu, double sigma, std::uint64_t seed)
      : theta_(theta), mu_(mu), sigma_(sigma), x_(mu), rng_(seed) {}

  double step() {
    x_ += theta_ * (mu_ - x_) + sigma_ * gauss_(rng_);
    return x_;
  }

  double value() const { return x_; }
  void set_value(double x) { x_ = x; }
  void reset() { x_ = mu_; }

 private:
  double theta_, mu_, sigma_, x_;
  Rng rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Raw actor outputs beyond +-kRawBound (logistic(4.6) ~ 0.99) are pulled
/// back by a quadratic penalty in the actor objective, so the policy cannot
/// drift into the flat tails of the squash where dQ/da stops reaching it.
inline constexpr double kRawBound = 4.6;
inline constexpr double kRawBoundWeight = 1.0;

inline double raw_excess(double raw) { return std::max(0.0, std::abs(raw) - kRawBound); }

/// Maps a raw actor output onto a margin in [0, 0.99].
inline double squash_margin(double raw) { return std::clamp(logistic(raw), 0.0, kMaxMargin); }

struct LearnStats {
  bool updated = false;
  bool rejected = false;  ///< non-finite data, nothing changed
  double critic_loss = 0.0;
  double critic_mae = 0.0;
  double actor_q = 0.0;
};

/// Sub-seeds of one agent.
struct AgentSeeds {
  std::uint64_t init = 0;
  std::uint64_t ou = 0;
  std::uint64_t replay = 0;
  std::uint64_t warmup = 0;

  static AgentSeeds derive(std::uint64_t global, std::string_view tag) {
    const std::string t(tag);
    return {derive_seed(global, "agent." + t), derive_seed(global, "ou." + t), derive_seed(global, "replay." + t),
            derive_seed(global, "warmup." + t)};
  }
};

/// DDPG margin selector: actor w->16->16->1, critic (w+1)->32->32->1, hard
/// target copies, replay and OU exploration.
class DdpgAgent {
 public:
  explicit DdpgAgent(DdpgConfig cfg, AgentSeeds seeds = {})
      : cfg_(cfg),
        replay_(cfg.replay_capacity, seeds.replay),
        noise_(cfg.ou_theta, cfg.ou_mu, cfg.ou_sigma, seeds.ou),
        warmup_rng_(seeds.warmup) {
    cfg_.validate();
    Rng init(seeds.init);
    using nn::Activation;
    const int w = cfg_.w_state;
    actor_ = nn::DenseNet({{w, 16, Activation::relu}, {16, 16, Activation::relu}, {16, 1, Activation::linear}}, init);
    critic_ =
        nn::DenseNet({{w + 1, 32, Activation::relu}, {32, 32, Activation::relu}, {32, 1, Activation::linear}}, init);
    target_actor_ = actor_;
    target_critic_ = critic_;
    actor_opt_ = nn::AdamState(actor_, cfg_.alpha);
    critic_opt_ = nn::AdamState(critic_, cfg_.alpha);
  }

  const DdpgConfig& config() const { return cfg_; }
  const nn::DenseNet& actor() const { return actor_; }
  const nn::DenseNet& critic() const { return critic_; }
  const nn::DenseNet& target_actor() const { return target_actor_; }
  const nn::DenseNet& target_critic() const { return target_critic_; }
  nn::DenseNet& actor() { return actor_; }
  nn::DenseNet& critic() { return critic_; }
  const ReplayBuffer& replay() const { return replay_; }
  const OuProcess& noise() const { return noise_; }
  std::size_t learn_calls() const { return learn_calls_; }
  std::size_t updates() const { return updates_; }

  /// Rewards are divided by this before entering the critic.
  double reward_scale() const { return reward_scale_; }
  void set_reward_scale(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("reward scale must be positive");
    reward_scale_ = s;
  }

  /// Greedy margin; a pure function of the state and weights.
  double policy(std::span<const double> state) const { return squash_margin(raw_action(state)); }

  /// Margin for the next step. With `explore`, the first warmup_steps calls
  /// draw uniformly from [0, 0.99) and later calls add OU noise before squashing.
  double act(std::span<const double> state, bool explore) {
    if (!explore) return policy(state);
    if (explore_calls_++ < cfg_.warmup_steps)
      return std::uniform_real_distribution<double>(0.0, kMaxMargin)(warmup_rng_);
    return squash_margin(raw_action(state) + noise_.step());
  }

  LearnStats store_and_learn(Transition t) {
    LearnStats stats;
    if (!t.finite() || t.state.size() != state_size() || t.next_state.size() != state_size() ||
        !(t.action >= 0.0 && t.action <= kMaxMargin)) {
      stats.rejected = true;
      return stats;
    }
    replay_.push(std::move(t));
    ++learn_calls_;
    if (replay_.size() >= std::max(cfg_.batch_size, cfg_.warmup_steps)) stats = update(replay_.sample(cfg_.batch_size));
    const auto period = static_cast<std::size_t>(cfg_.target_update_days) * static_cast<std::size_t>(cfg_.steps_per_day);
    if (learn_calls_ % period == 0) sync_targets();
    return stats;
  }

  void sync_targets() {
    nn::copy_parameters(actor_, target_actor_);
    nn::copy_parameters(critic_, target_critic_);
  }

  /// One critic step toward r/scale + gamma * Q'(s', mu'(s')) followed by one
  /// actor step along dQ/da.
  LearnStats update(const std::vector<const Transition*>& batch) {
    LearnStats stats;
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) return stats;
    const int w = cfg_.w_state;
    nn::Matrix s(w, n), s_next(w, n), critic_in(w + 1, n);
    nn::Vector rewards(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& tr = *batch[static_cast<std::size_t>(j)];
      for (int i = 0; i < w; ++i) {
        s(i, j) = tr.state[static_cast<std::size_t>(i)];
        s_next(i, j) = tr.next_state[static_cast<std::size_t>(i)];
      }
      rewards(j) = tr.reward / reward_scale_;
    }
    if (!s.allFinite() || !s_next.allFinite() || !rewards.allFinite()) {
      stats.rejected = true;
      return stats;
    }
    critic_in.topRows(w) = s;
    for (Eigen::Index j = 0; j < n; ++j) critic_in(w, j) = batch[static_cast<std::size_t>(j)]->action;

    // critic
    nn::Matrix next_in(w + 1, n);
    next_in.topRows(w) = s_next;
    next_in.row(w) = target_actor_.forward(s_next).row(0).unaryExpr([](double r) { return squash_margin(r); });
    const nn::Vector targets = rewards + cfg_.gamma * target_critic_.forward(next_in).row(0).transpose();
    auto critic_trace = critic_.forward_trace(critic_in);
    const nn::Vector diff = critic_trace.output().row(0).transpose() - targets;
    const double inv_n = 1.0 / static_cast<double>(n);
    stats.critic_mae = diff.cwiseAbs().mean();
    nn::Matrix upstream(1, n);
    if (cfg_.critic_loss == CriticLoss::mae) {
      stats.critic_loss = stats.critic_mae;
      for (Eigen::Index j = 0; j < n; ++j)
        upstream(0, j) = diff(j) > 0.0 ? inv_n : (diff(j) < 0.0 ? -inv_n : 0.0);
    } else {
      stats.critic_loss = diff.squaredNorm() * inv_n;
      upstream.row(0) = 2.0 * inv_n * diff.transpose();
    }
    auto critic_grads = critic_.backward(critic_trace, upstream);
    if (!critic_grads.all_finite()) {
      stats.rejected = true;
      return stats;
    }
    nn::adam_step(critic_, critic_opt_, critic_grads);

    // actor: descend on -mean Q(s, mu(s))
    auto actor_grads = actor_objective_gradient(s, &stats.actor_q);
    for (auto& g : actor_grads.weights) g = -g;
    for (auto& g : actor_grads.bias) g = -g;
    if (!actor_grads.all_finite()) {
      stats.rejected = true;
      return stats;
    }
    nn::adam_step(actor_, actor_opt_, actor_grads);
    stats.updated = true;
    ++updates_;
    return stats;
  }

  /// mean over the batch of Q(s, logistic(actor(s))) minus the raw-bound penalty.
  double actor_objective(const nn::Matrix& states) const {
    const int w = cfg_.w_state;
    const nn::Matrix raw = actor_.forward(states);
    nn::Matrix in(w + 1, states.cols());
    in.topRows(w) = states;
    in.row(w) = raw.row(0).unaryExpr([](double r) { return logistic(r); });
    const double bound = raw.row(0).unaryExpr([](double r) { return raw_excess(r) * raw_excess(r); }).mean();
    return critic_.forward(in).mean() - 0.5 * kRawBoundWeight * bound;
  }

  /// Gradient of actor_objective w.r.t. the actor parameters, chained through
  /// the critic's action input and the logistic squash.
  nn::Gradients actor_objective_gradient(const nn::Matrix& states, double* objective = nullptr) const {
    const int w = cfg_.w_state;
    const auto n = states.cols();
    auto actor_trace = actor_.forward_trace(states);
    const nn::Matrix raw = actor_trace.output();
    nn::Matrix in(w + 1, n);
    in.topRows(w) = states;
    in.row(w) = raw.row(0).unaryExpr([](double r) { return logistic(r); });
    auto critic_trace = critic_.forward_trace(in);
    if (objective) *objective = critic_trace.output().mean();
    const double inv_n = 1.0 / static_cast<double>(n);
    const nn::Matrix ones = nn::Matrix::Constant(1, n, inv_n);
    auto critic_grads = critic_.backward(critic_trace, ones);
    nn::Matrix upstream(1, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double r = raw(0, j);
      const double a = logistic(r);
      const double pull = kRawBoundWeight * raw_excess(r) * (r > 0.0 ? 1.0 : -1.0) * inv_n;
      upstream(0, j) = critic_grads.input(w, j) * a * (1.0 - a) - pull;
    }
    return actor_.backward(actor_trace, upstream);
  }

  void save(std::ostream& out) const {
    out << "releaser-agent 1\n";
    out << "[config]\n";
    for (const auto& [k, v] : config_entries()) out << k << ' ' << v << '\n';
    out << "[normalization]\nreward_scale " << nn::detail::exact(reward_scale_) << '\n';
    out << "[ou]\nx " << nn::detail::exact(noise_.value()) << '\n';
    out << "[actor]\n";
    nn::write_net(out, actor_);
    out << "[critic]\n";
    nn::write_net(out, critic_);
    out << "[target_actor]\n";
    nn::write_net(out, target_actor_);
    out << "[target_critic]\n";
    nn::write_net(out, target_critic_);
    out << "end\n";
  }

  /// Restores an agent for acting. Replay contents and optimizer moments are
  /// not part of a checkpoint.
  static DdpgAgent load(std::istream& in) {
    nn::detail::expect(in, "releaser-agent", "header");
    nn::detail::expect(in, "1", "header");
    nn::detail::expect(in, "[config]", "config");
    std::map<std::string, std::string> entries;
    std::string key;
    while (true) {
      if (!(in >> key)) throw CheckpointError("config", "unexpected end of file");
      if (key == "[normalization]") break;
      std::string value;
      if (!(in >> value)) throw CheckpointError("config", "missing value for " + key);
      entries[key] = value;
    }
    DdpgConfig cfg = config_from_entries(entries);
    DdpgAgent agent(cfg);
    nn::detail::expect(in, "reward_scale", "normalization");
    agent.reward_scale_ = nn::detail::read_double(in, "normalization");
    nn::detail::expect(in, "[ou]", "ou");
    nn::detail::expect(in, "x", "ou");
    agent.noise_.set_value(nn::detail::read_double(in, "ou"));
    auto read_into = [&](const char* section, nn::DenseNet& net) {
      nn::detail::expect(in, std::string("[") + section + "]", section);
      nn::DenseNet loaded = nn::read_net(in, section);
      if (!loaded.same_shape(net)) throw CheckpointError(section, "architecture does not match the configuration");
      net = std::move(loaded);
    };
    read_into("actor", agent.actor_);
    read_into("critic", agent.critic_);
    read_into("target_actor", agent.target_actor_);
    read_into("target_critic", agent.target_critic_);
    nn::detail::expect(in, "end", "end");
    return agent;
  }

 private:
  std::size_t state_size() const { return static_cast<std::size_t>(cfg_.w_state); }

  double raw_action(std::span<const double> state) const {
    if (state.size() != state_size())
      throw DomainError("state has " + std::to_string(state.size()) + " entries, agent expects " +
                        std::to_string(cfg_.w_state));
    nn::Vector x(cfg_.w_state);
    for (int i = 0; i < cfg_.w_state; ++i) x(i) = state[static_cast<std::size_t>(i)];
    return actor_.forward(x)(0);
  }

  std::vector<std::pair<std::string, std::string>> config_entries() const {
    using nn::detail::exact;
    return {{"alpha", exact(cfg_.alpha)},
            {"gamma", exact(cfg_.gamma)},
            {"replay_capacity", std::to_string(cfg_.replay_capacity)},
            {"batch_size", std::to_string(cfg_.batch_size)},
            {"warmup_steps", std::to_string(cfg_.warmup_steps)},
            {"ou_theta", exact(cfg_.ou_theta)},
            {"ou_mu", exact(cfg_.ou_mu)},
            {"ou_sigma", exact(cfg_.ou_sigma)},
            {"target_update_days", std::to_string(cfg_.target_update_days)},
            {"w_state", std::to_string(cfg_.w_state)},
            {"train_fraction", exact(cfg_.train_fraction)},
            {"steps_per_day", std::to_string(cfg_.steps_per_day)},
            {"critic_loss", cfg_.critic_loss == CriticLoss::mae ? "mae" : "mse"},
            {"epochs", std::to_string(cfg_.epochs)}};
  }

  static DdpgConfig config_from_entries(const std::map<std::string, std::string>& e) {
    auto get = [&](const std::string& k) -> const std::string& {
      auto it = e.find(k);
      if (it == e.end()) throw CheckpointError("config", "missing key " + k);
      return it->second;
    };
    auto num = [&](const std::string& k) {
      std::istringstream s(get(k));
      return nn::detail::read_double(s, "config");
    };
    auto count = [&](const std::string& k) {
      const double v = num(k);
      if (v < 0.0 || v != std::floor(v)) throw CheckpointError("config", k + " must be a non-negative integer");
      return static_cast<std::size_t>(v);
    };
    DdpgConfig c;
    c.alpha = num("alpha");
    c.gamma = num("gamma");
    c.replay_capacity = count("replay_capacity");
    c.batch_size = count("batch_size");
    c.warmup_steps = count("warmup_steps");
    c.ou_theta = num("ou_theta");
    c.ou_mu = num("ou_mu");
    c.ou_sigma = num("ou_sigma");
    c.target_update_days = static_cast<int>(count("target_update_days"));
    c.w_state = static_cast<int>(count("w_state"));
    c.train_fraction = num("train_fraction");
    c.steps_per_day = static_cast<int>(count("steps_per_day"));
    const auto& loss = get("critic_loss");
    if (loss == "mae")
      c.critic_loss = CriticLoss::mae;
    else if (loss == "mse")
      c.critic_loss = CriticLoss::mse;
    else
      throw CheckpointError("config", "unknown critic_loss " + loss);
    c.epochs = static_cast<int>(count("epochs"));
    try {
      c.validate();
    } catch (const ConfigError& err) {
      throw CheckpointError("config", err.what());
    }
    return c;
  }

  DdpgConfig cfg_;
  nn::DenseNet actor_, critic_, target_actor_, target_critic_;
  nn::AdamState actor_opt_, critic_opt_;
  ReplayBuffer replay_;
  OuProcess noise_;
  Rng warmup_rng_;
  std::size_t explore_calls_ = 0;
  std::size_t learn_calls_ = 0;
  std::size_t updates_ = 0;
  double reward_scale_ = 1.0;
};

}  // namespace releaser
