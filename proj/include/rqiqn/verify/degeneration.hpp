#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rqiqn/agent/agent.hpp"
#include "rqiqn/env/chain.hpp"

namespace rqiqn::verify {

/// Midpoint probe fractions (i + 1/2) / m.
inline std::vector<double> probe_grid(std::size_t m) {
  std::vector<double> t(m);
  for (std::size_t i = 0; i < m; ++i) t[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
  return t;
}

/// Population standard deviation of quantile values on a uniform fraction
/// grid, i.e. the spread of the represented distribution.
inline double grid_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

struct StateSpread {
  int state = 0;
  double learned_std = 0.0;
  double true_std = 0.0;      // grid std of exact quantiles
  double analytic_std = 0.0;  // gamma^(2-s) sqrt(mixture variance)
  double gap = 0.0;           // |learned_std - true_std|
  std::vector<double> learned_quantiles;
  std::vector<double> true_quantiles;
};

struct SpreadReport {
  std::vector<double> taus;
  std::vector<StateSpread> states;
};

/// Compares learned quantiles against the exact chain return quantiles at
/// states 0..2. `quantiles_at(state, taus)` supplies the learned values.
template <class F>
SpreadReport degeneration_metrics(const F& quantiles_at, const env::ChainConfig& chain, std::span<const double> taus) {
  SpreadReport report;
  report.taus.assign(taus.begin(), taus.end());
  for (int s = 0; s < env::ChainConfig::kTerminal; ++s) {
    StateSpread st;
    st.state = s;
    st.learned_quantiles = quantiles_at(s, taus);
    st.true_quantiles = env::true_return_quantiles(s, chain, taus);
    st.learned_std = grid_std(st.learned_quantiles);
    st.true_std = grid_std(st.true_quantiles);
    st.analytic_std = env::true_return_std(s, chain);
    st.gap = std::abs(st.learned_std - st.true_std);
    report.states.push_back(std::move(st));
  }
  return report;
}

inline SpreadReport degeneration_metrics(const agent::Agent& agent, const env::ChainConfig& chain,
                                         std::span<const double> taus) {
  const auto fn = [&](int s, std::span<const double> t) {
    const ad::Tensor z = agent.quantiles(env::chain_observation(s), t);
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = z(i, 0);
    return out;
  };
  return degeneration_metrics(fn, chain, taus);
}

}  // namespace rqiqn::verify
