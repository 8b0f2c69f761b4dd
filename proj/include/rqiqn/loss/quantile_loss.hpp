#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rqiqn::loss {

enum class LossKind { check, quantile_huber };

struct LossConfig {
  LossKind kind = LossKind::check;
  double kappa = 1.0;  // Huber threshold, return units
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void validate(const LossConfig& cfg) {
  if (cfg.kind == LossKind::quantile_huber && !(cfg.kappa > 0.0)) {
    throw ConfigError("quantile Huber loss needs kappa > 0, got " + std::to_string(cfg.kappa));
  }
}

/// |tau - 1{u<0}|; the indicator is strict, so u = 0 falls on the tau side.
inline double asymmetry_weight(double u, double tau) noexcept { return u < 0.0 ? 1.0 - tau : tau; }

/// Pinball loss rho_tau(u) = u (tau - 1{u<0}).
inline double check_loss(double u, double tau) noexcept { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

/// Subgradient of check_loss in u; the right derivative tau at u = 0.
inline double check_loss_derivative(double u, double tau) noexcept { return u < 0.0 ? tau - 1.0 : tau; }

inline double huber_kernel(double u, double kappa) {
  if (!(kappa > 0.0)) throw ConfigError("huber_kernel needs kappa > 0, got " + std::to_string(kappa));
  const double a = std::abs(u);
  return a <= kappa ? 0.5 * u * u : kappa * (a - 0.5 * kappa);
}

inline double huber_kernel_derivative(double u, double kappa) noexcept {
  return std::abs(u) <= kappa ? u : (u > 0.0 ? kappa : -kappa);
}

inline double quantile_huber(double u, double tau, double kappa) {
  return asymmetry_weight(u, tau) * huber_kernel(u, kappa) / kappa;
}

inline double quantile_huber_derivative(double u, double tau, double kappa) noexcept {
  return asymmetry_weight(u, tau) * huber_kernel_derivative(u, kappa) / kappa;
}

inline double elementwise_loss(double u, double tau, const LossConfig& cfg) {
  return cfg.kind == LossKind::check ? check_loss(u, tau) : quantile_huber(u, tau, cfg.kappa);
}

inline double elementwise_derivative(double u, double tau, const LossConfig& cfg) noexcept {
  return cfg.kind == LossKind::check ? check_loss_derivative(u, tau) : quantile_huber_derivative(u, tau, cfg.kappa);
}

/// Pairwise TD residuals of one transition: delta(i, j) pairs current
/// fraction tau_i with target fraction tau'_j.
struct TDErrorMatrix {
  std::vector<double> delta;  // row-major N x N'
  std::vector<double> current_fractions;
  std::vector<double> target_fractions;

  [[nodiscard]] std::size_t current_count() const noexcept { return current_fractions.size(); }
  [[nodiscard]] std::size_t target_count() const noexcept { return target_fractions.size(); }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return delta[i * target_count() + j]; }

  void validate() const {
    if (current_fractions.empty() || target_fractions.empty()) throw std::invalid_argument("TDErrorMatrix is empty");
    if (delta.size() != current_count() * target_count()) {
      throw std::invalid_argument("TDErrorMatrix: residual count does not match N x N'");
    }
    for (double t : current_fractions) {
      if (!(t > 0.0 && t < 1.0)) throw std::domain_error("TDErrorMatrix: current fraction outside (0,1)");
    }
    for (double t : target_fractions) {
      if (!(t > 0.0 && t < 1.0)) throw std::domain_error("TDErrorMatrix: target fraction outside (0,1)");
    }
  }
};

/// (1/N') sum_i sum_j rho_{tau_i}(delta_ij).
inline double aggregate_loss(const TDErrorMatrix& m, const LossConfig& cfg) {
  m.validate();
  validate(cfg);
  const std::size_t n = m.current_count(), np = m.target_count();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = m.current_fractions[i];
    for (std::size_t j = 0; j < np; ++j) total += elementwise_loss(m.delta[i * np + j], tau, cfg);
  }
  return total / static_cast<double>(np);
}

/// d aggregate_loss / d delta_ij, same layout as delta.
inline std::vector<double> aggregate_loss_gradient(const TDErrorMatrix& m, const LossConfig& cfg) {
  m.validate();
  validate(cfg);
  const std::size_t n = m.current_count(), np = m.target_count();
  std::vector<double> g(n * np);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      g[i * np + j] = elementwise_derivative(m.delta[i * np + j], m.current_fractions[i], cfg) / static_cast<double>(np);
    }
  }
  return g;
}

}  // namespace rqiqn::loss
