#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "rqiqn/autodiff/mlp.hpp"

namespace rqiqn::env {

/// Four-state deterministic chain 0 -> 1 -> 2 -> 3 with a single action.
/// The only nonzero reward is paid on entering state 3 and is drawn from an
/// equal-weight mixture of N(-mean, std) and N(+mean, std).
struct ChainConfig {
  double gamma = 0.99;
  double mixture_mean = 2.0;
  double mixture_std = 1.0;

  static constexpr int kStates = 4;
  static constexpr int kTerminal = 3;
};

struct ChainStep {
  int next_state;
  double reward;
  bool done;
};

inline double sample_mixture_reward(const ChainConfig& cfg, Rng& rng) {
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, cfg.mixture_std);
  const double centre = coin(rng) ? cfg.mixture_mean : -cfg.mixture_mean;
  return centre + noise(rng);
}

inline ChainStep chain_step(int state, const ChainConfig& cfg, Rng& rng) {
  if (state < 0 || state >= ChainConfig::kTerminal) {
    throw std::out_of_range("chain_step: state " + std::to_string(state) + " is not a live chain state");
  }
  const int next = state + 1;
  if (next == ChainConfig::kTerminal) return {next, sample_mixture_reward(cfg, rng), true};
  return {next, 0.0, false};
}

/// One-hot encoding over the four states.
inline std::vector<double> chain_observation(int state) {
  std::vector<double> obs(ChainConfig::kStates, 0.0);
  obs.at(static_cast<std::size_t>(state)) = 1.0;
  return obs;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// CDF of the terminal reward mixture.
inline double mixture_cdf(double x, const ChainConfig& cfg) {
  return 0.5 * normal_cdf((x + cfg.mixture_mean) / cfg.mixture_std) +
         0.5 * normal_cdf((x - cfg.mixture_mean) / cfg.mixture_std);
}

/// Inverse of mixture_cdf by bisection.
inline double mixture_quantile(double tau, const ChainConfig& cfg) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("mixture_quantile: tau outside (0,1)");
  double lo = -cfg.mixture_mean - 40.0 * cfg.mixture_std;
  double hi = cfg.mixture_mean + 40.0 * cfg.mixture_std;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mixture_cdf(mid, cfg) < tau ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Exact return quantiles gamma^(2 - state) * F_r^{-1}(tau) for states 0..2.
inline std::vector<double> true_return_quantiles(int state, const ChainConfig& cfg, std::span<const double> taus) {
  if (state < 0 || state >= ChainConfig::kTerminal) throw std::out_of_range("true_return_quantiles: state");
  const double discount = std::pow(cfg.gamma, 2 - state);
  std::vector<double> out;
  out.reserve(taus.size());
  for (double t : taus) out.push_back(discount * mixture_quantile(t, cfg));
  return out;
}

/// Analytic standard deviation of the return from state.
inline double true_return_std(int state, const ChainConfig& cfg) {
  const double var = cfg.mixture_std * cfg.mixture_std + cfg.mixture_mean * cfg.mixture_mean;
  return std::pow(cfg.gamma, 2 - state) * std::sqrt(var);
}

}  // namespace rqiqn::env
