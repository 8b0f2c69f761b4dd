#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "rqiqn/autodiff/mlp.hpp"
#include "rqiqn/autodiff/tape.hpp"

namespace rqiqn::agent {

struct NetworkConfig {
  std::size_t hidden = 128;
  std::size_t cosine_features = 64;
};

/// Fraction-conditioned return quantile approximator Z_tau(s, a).
///
/// state -> 2-layer rectifier embedding; tau -> cosine features -> linear ->
/// rectifier; the two embeddings are multiplied elementwise and passed
/// through a one-hidden-layer head with one output per action.
struct QuantileNetwork {
  ad::MlpParams state_net;
  ad::MlpParams fraction_net;
  ad::MlpParams head;
  std::size_t cosine_features = 64;

  QuantileNetwork() = default;

  QuantileNetwork(std::size_t observation_size, std::size_t actions, const NetworkConfig& cfg, Rng& rng)
      : state_net({observation_size, cfg.hidden, cfg.hidden}, true, rng),
        fraction_net({cfg.cosine_features, cfg.hidden}, true, rng),
        head({cfg.hidden, cfg.hidden, actions}, false, rng),
        cosine_features(cfg.cosine_features) {}

  [[nodiscard]] std::size_t actions() const { return head.output_width(); }
  [[nodiscard]] std::size_t observation_size() const { return state_net.input_width(); }

  std::vector<ad::ParamRef> parameters() {
    std::vector<ad::ParamRef> out;
    state_net.collect("state", out);
    fraction_net.collect("fraction", out);
    head.collect("head", out);
    return out;
  }

  std::vector<ad::ConstParamRef> parameters() const {
    std::vector<ad::ConstParamRef> out;
    state_net.collect("state", out);
    fraction_net.collect("fraction", out);
    head.collect("head", out);
    return out;
  }

  friend bool operator==(const QuantileNetwork&, const QuantileNetwork&) = default;
};

struct BoundQuantileNetwork {
  ad::BoundMlp state;
  ad::BoundMlp fraction;
  ad::BoundMlp head;
  std::size_t cosine_features;
};

inline BoundQuantileNetwork bind(ad::Tape& tape, const QuantileNetwork& net, bool trainable) {
  return {ad::bind(tape, net.state_net, trainable), ad::bind(tape, net.fraction_net, trainable),
          ad::bind(tape, net.head, trainable), net.cosine_features};
}

inline std::vector<ad::Tensor> gradients(ad::Tape& tape, const BoundQuantileNetwork& net) {
  std::vector<ad::Tensor> out = ad::gradients(tape, net.state);
  for (auto* part : {&net.fraction, &net.head}) {
    auto g = ad::gradients(tape, *part);
    out.insert(out.end(), std::make_move_iterator(g.begin()), std::make_move_iterator(g.end()));
  }
  return out;
}

/// cos(pi i tau) for i < n via the Chebyshev recurrence. Agrees with
/// ad::cosine_basis to rounding.
inline ad::Tensor fast_cosine_basis(std::span<const double> taus, std::size_t n) {
  ad::Tensor out = ad::Tensor::matrix(taus.size(), n);
  for (std::size_t r = 0; r < taus.size(); ++r) {
    double* row = &out[r * n];
    const double c1 = std::cos(std::numbers::pi * taus[r]);
    if (n > 0) row[0] = 1.0;
    if (n > 1) row[1] = c1;
    for (std::size_t i = 2; i < n; ++i) row[i] = 2.0 * c1 * row[i - 1] - row[i - 2];
  }
  return out;
}

/// Quantile values for `states` ([B x obs]) at `taus` (B * per_state
/// fractions, grouped by state). Returns [B * per_state x actions].
inline ad::Var quantile_values(ad::Tape& tape, const BoundQuantileNetwork& net, const ad::Tensor& states,
                               std::span<const double> taus, std::size_t per_state) {
  if (taus.size() != states.rows() * per_state) {
    throw ad::ShapeError("quantile_values", states.shape(), "needs " + std::to_string(per_state) + " fractions per row");
  }
  ad::Var s = ad::forward(net.state, tape.constant(states));
  if (per_state != 1) s = ad::repeat_rows(s, per_state);
  ad::Var phi = ad::forward(net.fraction, tape.constant(fast_cosine_basis(taus, net.cosine_features)));
  return ad::forward(net.head, ad::hadamard(s, phi));
}

/// Forward-only evaluation without gradient tracking.
inline ad::Tensor evaluate(const QuantileNetwork& net, const ad::Tensor& states, std::span<const double> taus,
                           std::size_t per_state) {
  ad::Tape tape;
  const BoundQuantileNetwork bound = bind(tape, net, false);
  return tape.value(quantile_values(tape, bound, states, taus, per_state));
}

}  // namespace rqiqn::agent
