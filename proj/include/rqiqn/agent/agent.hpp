#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rqiqn/agent/quantile_network.hpp"
#include "rqiqn/agent/replay.hpp"
#include "rqiqn/agent/td.hpp"
#include "rqiqn/autodiff/mlp.hpp"
#include "rqiqn/autodiff/optimizer.hpp"
#include "rqiqn/loss/quantile_loss.hpp"
#include "rqiqn/robust/correction.hpp"

namespace rqiqn::agent {

enum class AgentKind { dqn, iqn, rqiqn };

inline const char* agent_kind_name(AgentKind k) {
  switch (k) {
    case AgentKind::dqn: return "dqn";
    case AgentKind::iqn: return "iqn";
    case AgentKind::rqiqn: return "rqiqn";
  }
  return "?";
}

/// Linear epsilon-greedy decay from start to end over horizon steps.
struct ExplorationSchedule {
  double start = 1.0;
  double end = 0.05;
  std::uint64_t horizon = 10000;

  [[nodiscard]] double at(std::uint64_t step) const {
    if (horizon == 0 || step >= horizon) return end;
    const double frac = static_cast<double>(step) / static_cast<double>(horizon);
    return start + (end - start) * frac;
  }
};

struct AgentConfig {
  AgentKind kind = AgentKind::rqiqn;
  std::size_t num_fractions = 8;            // N
  std::size_t num_target_fractions = 8;     // N'
  std::size_t num_selection_fractions = 32; // K
  double gamma = 0.99;
  loss::LossConfig loss;
  robust::RobustConfig robust;
  robust::DistortionConfig distortion;
  NetworkConfig network;
  ad::AdamConfig optimizer;
  double grad_clip_norm = 0.0;  // <= 0 disables clipping
  std::size_t batch_size = 64;
  std::size_t replay_capacity = 50000;
  std::uint64_t target_sync_period = 1000;
  std::uint64_t update_period = 1;
  std::uint64_t train_start = 1000;
  ExplorationSchedule exploration;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_fractions < 1 || num_target_fractions < 1 || num_selection_fractions < 1) {
      throw std::invalid_argument("agent: N, N' and K must be >= 1");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("agent: gamma must lie in [0,1)");
    if (batch_size < 1) throw std::invalid_argument("agent: batch size must be >= 1");
    if (target_sync_period < 1 || update_period < 1) throw std::invalid_argument("agent: periods must be >= 1");
    loss::validate(loss);
    robust.validate();
    distortion.validate();
  }
};

/// Trainable state of an agent. Net is QuantileNetwork or ad::MlpParams.
template <class Net>
struct Snapshot {
  Net online;
  Net target;
  ad::OptimizerState optimizer;
  std::uint64_t step = 0;
  double epsilon = 0.0;  // current robustness radius
};

struct TrainStats {
  bool updated = false;
  bool synced = false;
  double loss = 0.0;
  double epsilon = 0.0;
};

/// Common driver interface used by the experiment runner.
class Agent {
 public:
  virtual ~Agent() = default;
  [[nodiscard]] virtual AgentKind kind() const = 0;
  [[nodiscard]] virtual const AgentConfig& config() const = 0;
  /// Epsilon-greedy action with the agent's own generator.
  virtual int act(std::span<const double> observation, std::optional<double> context) = 0;
  /// Greedy action; fractions come from `rng`.
  virtual int act_greedy(std::span<const double> observation, std::optional<double> context, Rng& rng) const = 0;
  virtual void observe(Transition t) = 0;
  virtual TrainStats train_step() = 0;
  [[nodiscard]] virtual std::uint64_t step() const = 0;
  /// Per-action quantile values at the given fractions, [taus x actions].
  /// DQN returns its scalar Q values repeated per fraction.
  [[nodiscard]] virtual ad::Tensor quantiles(std::span<const double> observation, std::span<const double> taus) const = 0;
};

namespace detail {

inline ad::Tensor stack_rows(std::span<const Transition* const> batch, bool next) {
  const std::size_t width = (next ? batch.front()->next_state : batch.front()->state).size();
  ad::Tensor out = ad::Tensor::matrix(batch.size(), width);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& v = next ? batch[b]->next_state : batch[b]->state;
    if (v.size() != width) throw std::invalid_argument("batch: inconsistent observation sizes");
    std::copy(v.begin(), v.end(), &out[b * width]);
  }
  return out;
}

inline ad::Tensor row_tensor(std::span<const double> obs) {
  return ad::Tensor::matrix(1, obs.size(), std::vector<double>(obs.begin(), obs.end()));
}

}  // namespace detail

/// IQN and its robust variant. With kind == iqn no correction is computed;
/// with kind == rqiqn the correction at radius epsilon_schedule(t) shifts
/// each residual at the current fraction.
class QuantileAgent final : public Agent {
 public:
  QuantileAgent(AgentConfig cfg, std::size_t observation_size, std::size_t actions)
      : cfg_(std::move(cfg)), rng_(cfg_.seed), buffer_(cfg_.replay_capacity) {
    cfg_.validate();
    if (cfg_.kind == AgentKind::dqn) throw std::invalid_argument("QuantileAgent: kind must be iqn or rqiqn");
    Rng init(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
    snap_.online = QuantileNetwork(observation_size, actions, cfg_.network, init);
    snap_.target = snap_.online;
    snap_.optimizer.config = cfg_.optimizer;
    snap_.epsilon = current_epsilon(0);
  }

  [[nodiscard]] AgentKind kind() const override { return cfg_.kind; }
  [[nodiscard]] const AgentConfig& config() const override { return cfg_; }
  [[nodiscard]] std::uint64_t step() const override { return snap_.step; }
  [[nodiscard]] const Snapshot<QuantileNetwork>& snapshot() const noexcept { return snap_; }
  Snapshot<QuantileNetwork>& mutable_snapshot() noexcept { return snap_; }
  [[nodiscard]] const ReplayBuffer& buffer() const noexcept { return buffer_; }
  Rng& rng() noexcept { return rng_; }

  int act(std::span<const double> observation, std::optional<double> context) override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t actions = snap_.online.actions();
    if (actions > 1 && u(rng_) < cfg_.exploration.at(snap_.step)) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(actions) - 1);
      return pick(rng_);
    }
    return greedy(snap_.online, observation, context, rng_);
  }

  int act_greedy(std::span<const double> observation, std::optional<double> context, Rng& rng) const override {
    return greedy(snap_.online, observation, context, rng);
  }

  void observe(Transition t) override { buffer_.insert(std::move(t)); }

  [[nodiscard]] ad::Tensor quantiles(std::span<const double> observation, std::span<const double> taus) const override {
    return evaluate(snap_.online, detail::row_tensor(observation), taus, taus.size());
  }

  [[nodiscard]] double current_epsilon(std::uint64_t t) const {
    return cfg_.kind == AgentKind::rqiqn ? robust::epsilon_schedule(static_cast<double>(t), cfg_.robust) : 0.0;
  }

  TrainStats train_step() override {
    ++snap_.step;
    snap_.epsilon = current_epsilon(snap_.step);
    TrainStats stats;
    stats.epsilon = snap_.epsilon;
    if (snap_.step >= cfg_.train_start && buffer_.size() >= cfg_.batch_size && snap_.step % cfg_.update_period == 0) {
      const auto batch = buffer_.sample(cfg_.batch_size, rng_);
      stats.loss = gradient_step(batch, snap_.epsilon);
      stats.updated = true;
    }
    if (snap_.step % cfg_.target_sync_period == 0) {
      snap_.target = snap_.online;
      stats.synced = true;
    }
    return stats;
  }

  /// Evaluates the bootstrap side of a batch:
  /// greedy next actions on the target network, fresh target fractions and
  /// the resulting bootstrap quantiles.
  TargetBatch evaluate_targets(std::span<const Transition* const> batch, Rng& rng) const {
    const std::size_t np = cfg_.num_target_fractions;
    const std::size_t actions = snap_.target.actions();
    TargetBatch tb;
    tb.target_count = np;
    const ad::Tensor next_states = detail::stack_rows(batch, true);
    std::vector<std::size_t> next_actions(batch.size(), 0);
    if (actions > 1) {
      const std::size_t k = cfg_.num_selection_fractions;
      std::vector<double> sel;
      sel.reserve(batch.size() * k);
      for (const Transition* t : batch) {
        const auto taus = selection_fractions(k, cfg_.distortion, t->next_context, rng);
        sel.insert(sel.end(), taus.begin(), taus.end());
      }
      const ad::Tensor zs = evaluate(snap_.target, next_states, sel, k);
      for (std::size_t b = 0; b < batch.size(); ++b) {
        next_actions[b] = static_cast<std::size_t>(greedy_from_quantiles(zs, b * k, k));
      }
    }
    tb.target_fractions = sample_fractions(batch.size() * np, rng);
    const ad::Tensor z = evaluate(snap_.target, next_states, tb.target_fractions, np);
    tb.next_quantiles.resize(batch.size() * np);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      tb.rewards.push_back(batch[b]->reward);
      tb.done.push_back(batch[b]->done ? 1 : 0);
      for (std::size_t j = 0; j < np; ++j) tb.next_quantiles[b * np + j] = z(b * np + j, next_actions[b]);
    }
    return tb;
  }

  /// Loss of a batch at radius epsilon, recorded on `tape` against `bound`
  /// (the online network). Draws target-side randomness before the current
  /// fractions.
  ad::Var batch_loss(ad::Tape& tape, const BoundQuantileNetwork& bound, std::span<const Transition* const> batch,
                     double epsilon, Rng& rng) const {
    const std::size_t n = cfg_.num_fractions;
    const TargetBatch tb = evaluate_targets(batch, rng);
    std::vector<double> taus = sample_fractions(batch.size() * n, rng);
    std::vector<double> shifts;
    if (cfg_.kind == AgentKind::rqiqn) shifts = robust_shifts(taus, epsilon, cfg_.robust);
    const ad::Tensor states = detail::stack_rows(batch, false);
    const ad::Var z = quantile_values(tape, bound, states, taus, n);
    std::vector<std::size_t> cols(batch.size() * n);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      std::fill_n(cols.begin() + static_cast<std::ptrdiff_t>(b * n), n, static_cast<std::size_t>(batch[b]->action));
    }
    const ad::Var chosen = ad::gather_columns(z, std::move(cols));
    return pairwise_quantile_loss(chosen, tb, std::move(taus), std::move(shifts), cfg_.gamma, cfg_.loss);
  }

 private:
  int greedy(const QuantileNetwork& net, std::span<const double> observation, std::optional<double> context,
             Rng& rng) const {
    const ad::Tensor row = detail::row_tensor(observation);
    const auto fn = [&](std::span<const double> taus) { return evaluate(net, row, taus, taus.size()); };
    return select_action(fn, net.actions(), cfg_.num_selection_fractions, cfg_.distortion, context, rng);
  }

  double gradient_step(std::span<const Transition* const> batch, double epsilon) {
    ad::Tape tape;
    const BoundQuantileNetwork bound = bind(tape, snap_.online, true);
    const ad::Var loss = batch_loss(tape, bound, batch, epsilon, rng_);
    const double value = tape.value(loss)[0];
    if (!std::isfinite(value)) throw std::runtime_error("non-finite training loss at step " + std::to_string(snap_.step));
    tape.backward(loss);
    std::vector<ad::Tensor> grads = gradients(tape, bound);
    ad::clip_by_global_norm(grads, cfg_.grad_clip_norm);
    const auto params = snap_.online.parameters();
    ad::adam_step(params, grads, snap_.optimizer);
    return value;
  }

  AgentConfig cfg_;
  Rng rng_;
  ReplayBuffer buffer_;
  Snapshot<QuantileNetwork> snap_;
};

/// Scalar Q-learning baseline with Huber TD error; shares replay,
/// exploration and target synchronisation with the quantile agents.
class DqnAgent final : public Agent {
 public:
  DqnAgent(AgentConfig cfg, std::size_t observation_size, std::size_t actions)
      : cfg_(std::move(cfg)), rng_(cfg_.seed), buffer_(cfg_.replay_capacity) {
    cfg_.validate();
    Rng init(cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
    snap_.online = ad::MlpParams({observation_size, cfg_.network.hidden, cfg_.network.hidden, actions}, false, init);
    snap_.target = snap_.online;
    snap_.optimizer.config = cfg_.optimizer;
  }

  [[nodiscard]] AgentKind kind() const override { return AgentKind::dqn; }
  [[nodiscard]] const AgentConfig& config() const override { return cfg_; }
  [[nodiscard]] std::uint64_t step() const override { return snap_.step; }
  [[nodiscard]] const Snapshot<ad::MlpParams>& snapshot() const noexcept { return snap_; }
  Snapshot<ad::MlpParams>& mutable_snapshot() noexcept { return snap_; }

  int act(std::span<const double> observation, std::optional<double> context) override {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t actions = snap_.online.output_width();
    if (actions > 1 && u(rng_) < cfg_.exploration.at(snap_.step)) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(actions) - 1);
      return pick(rng_);
    }
    return act_greedy(observation, context, rng_);
  }

  int act_greedy(std::span<const double> observation, std::optional<double>, Rng&) const override {
    const ad::Tensor q = q_values(snap_.online, detail::row_tensor(observation));
    return static_cast<int>(std::max_element(q.values().begin(), q.values().end()) - q.values().begin());
  }

  void observe(Transition t) override { buffer_.insert(std::move(t)); }

  [[nodiscard]] ad::Tensor quantiles(std::span<const double> observation, std::span<const double> taus) const override {
    const ad::Tensor q = q_values(snap_.online, detail::row_tensor(observation));
    ad::Tensor out = ad::Tensor::matrix(taus.size(), q.size());
    for (std::size_t r = 0; r < taus.size(); ++r) std::copy(q.values().begin(), q.values().end(), out.row(r).begin());
    return out;
  }

  TrainStats train_step() override {
    ++snap_.step;
    TrainStats stats;
    if (snap_.step >= cfg_.train_start && buffer_.size() >= cfg_.batch_size && snap_.step % cfg_.update_period == 0) {
      const auto batch = buffer_.sample(cfg_.batch_size, rng_);
      stats.loss = gradient_step(batch);
      stats.updated = true;
    }
    if (snap_.step % cfg_.target_sync_period == 0) {
      snap_.target = snap_.online;
      stats.synced = true;
    }
    return stats;
  }

  static ad::Tensor q_values(const ad::MlpParams& net, const ad::Tensor& states) {
    ad::Tape tape;
    const ad::BoundMlp bound = ad::bind(tape, net, false);
    return tape.value(ad::forward(bound, tape.constant(states)));
  }

  /// Bootstrap targets r + gamma max_a' Q_target(s', a'), or r at terminals.
  std::vector<double> targets(std::span<const Transition* const> batch) const {
    const ad::Tensor next_q = q_values(snap_.target, detail::stack_rows(batch, true));
    std::vector<double> out;
    out.reserve(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto row = next_q.row(b);
      const double best = *std::max_element(row.begin(), row.end());
      out.push_back(batch[b]->done ? batch[b]->reward : batch[b]->reward + cfg_.gamma * best);
    }
    return out;
  }

  ad::Var batch_loss(ad::Tape& tape, const ad::BoundMlp& bound, std::span<const Transition* const> batch) const {
    const ad::Var q = ad::forward(bound, tape.constant(detail::stack_rows(batch, false)));
    std::vector<std::size_t> cols;
    cols.reserve(batch.size());
    for (const Transition* t : batch) cols.push_back(static_cast<std::size_t>(t->action));
    return huber_td_loss(ad::gather_columns(q, std::move(cols)), targets(batch), cfg_.loss.kappa);
  }

 private:
  double gradient_step(std::span<const Transition* const> batch) {
    ad::Tape tape;
    const ad::BoundMlp bound = ad::bind(tape, snap_.online, true);
    const ad::Var loss = batch_loss(tape, bound, batch);
    const double value = tape.value(loss)[0];
    if (!std::isfinite(value)) throw std::runtime_error("non-finite training loss at step " + std::to_string(snap_.step));
    tape.backward(loss);
    std::vector<ad::Tensor> grads = ad::gradients(tape, bound);
    ad::clip_by_global_norm(grads, cfg_.grad_clip_norm);
    std::vector<ad::ParamRef> params;
    snap_.online.collect("q", params);
    ad::adam_step(params, grads, snap_.optimizer);
    return value;
  }

  AgentConfig cfg_;
  Rng rng_;
  ReplayBuffer buffer_;
  Snapshot<ad::MlpParams> snap_;
};

inline std::unique_ptr<Agent> make_agent(const AgentConfig& cfg, std::size_t observation_size, std::size_t actions) {
  if (cfg.kind == AgentKind::dqn) return std::make_unique<DqnAgent>(cfg, observation_size, actions);
  return std::make_unique<QuantileAgent>(cfg, observation_size, actions);
}

}  // namespace rqiqn::agent
