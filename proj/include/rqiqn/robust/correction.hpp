#pragma once

// Closed-form Wasserstein-robust location correction for a quantile
// regression slot, plus the radius decay schedule and fraction distortions
// used for risk-sensitive action selection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace rqiqn::robust {

/// Wasserstein order. Only the two shipped orders are first-class.
enum class Order { two, infinity };

/// raw: the exact slot correction. bounded: the endpoint-finite p = 2 form.
enum class Variant { raw, bounded };

inline double order_value(Order p) noexcept {
  return p == Order::two ? 2.0 : std::numeric_limits<double>::infinity();
}

/// Conjugate exponent q with 1/p + 1/q = 1; q = 1 for p = infinity.
inline double conjugate_exponent(double p) {
  if (!(p > 1.0)) throw std::domain_error("Wasserstein order must exceed 1, got " + std::to_string(p));
  return std::isinf(p) ? 1.0 : p / (p - 1.0);
}

struct RobustConfig {
  Order order = Order::two;
  double epsilon0 = 1.0;     // initial radius, return units
  double sharpness = 1e-5;   // k, per step
  double midpoint = 0.0;     // t0, steps
  Variant variant = Variant::bounded;

  void validate() const {
    if (!(epsilon0 >= 0.0)) throw std::invalid_argument("robust epsilon0 must be >= 0");
    if (!(sharpness > 0.0)) throw std::invalid_argument("robust sharpness k must be > 0");
    if (!(midpoint >= 0.0)) throw std::invalid_argument("robust midpoint t0 must be >= 0");
  }
};

/// One robust quantile slot: fraction, radius and order.
struct WassersteinSlot {
  double tau;
  double epsilon;
  double p;

  [[nodiscard]] double q() const { return conjugate_exponent(p); }
};

namespace detail {

inline void require_open_fraction(double tau, const char* who) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::domain_error(std::string(who) + ": fraction must lie in (0,1), got " + std::to_string(tau));
  }
}

}  // namespace detail

/// c_{tau,p}: (tau^q (1-tau) + tau (1-tau)^q)^(1/q) for finite p, 2 tau (1-tau) for p = infinity.
inline double c_tau_p(double tau, double p) {
  detail::require_open_fraction(tau, "c_tau_p");
  const double q = conjugate_exponent(p);
  const double lo = 1.0 - tau;
  if (std::isinf(p)) return 2.0 * tau * lo;
  return std::pow(std::pow(tau, q) * lo + tau * std::pow(lo, q), 1.0 / q);
}

inline double c_tau_p(double tau, Order p) { return c_tau_p(tau, order_value(p)); }

/// Exact robust slot correction (eps/q)(tau^q - (1-tau)^q) c^(1-q) for any
/// p in (1, inf]. Diverges at the endpoints for finite p.
inline double delta_raw(double tau, double epsilon, double p) {
  const double q = conjugate_exponent(p);
  const double c = c_tau_p(tau, p);
  const double lo = 1.0 - tau;
  return (epsilon / q) * (std::pow(tau, q) - std::pow(lo, q)) * std::pow(c, 1.0 - q);
}

inline double delta_raw(double tau, double epsilon, Order p) { return delta_raw(tau, epsilon, order_value(p)); }

/// Endpoint-finite p = 2 correction (eps/2)(1 - 2 tau) / sqrt(tau^2 + (1-tau)^2).
/// Defined on the closed interval; nonincreasing in tau.
inline double delta_bounded_2(double tau, double epsilon) {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw std::domain_error("delta_bounded_2: fraction must lie in [0,1], got " + std::to_string(tau));
  }
  const double lo = 1.0 - tau;
  return 0.5 * epsilon * (1.0 - 2.0 * tau) / std::sqrt(tau * tau + lo * lo);
}

/// Signed amount added to the TD residual at current fraction tau: the raw
/// forms are added as is, the bounded p = 2 form with its sign flipped. In
/// every case upper fractions are pushed up and lower fractions down.
inline double residual_shift(double tau, double epsilon, const RobustConfig& cfg) {
  if (cfg.order == Order::two && cfg.variant == Variant::bounded) return -delta_bounded_2(tau, epsilon);
  return delta_raw(tau, epsilon, cfg.order);
}

/// Reverse-logistic radius decay eps0 / (1 + exp(k (t - t0))).
inline double epsilon_schedule(double step, const RobustConfig& cfg) {
  if (!(step >= 0.0)) throw std::domain_error("epsilon_schedule: step must be >= 0");
  return cfg.epsilon0 / (1.0 + std::exp(cfg.sharpness * (step - cfg.midpoint)));
}

enum class DistortionKind { identity, cvar, adaptive_cvar };

struct DistortionConfig {
  DistortionKind kind = DistortionKind::identity;
  double eta = 1.0;          // CVaR threshold in (0,1]
  double safe_distance = 5.0;  // distance at which the adaptive threshold reaches 1
  double eta_min = 0.25;

  void validate() const {
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("distortion eta must lie in (0,1]");
    if (!(eta_min > 0.0 && eta_min <= 1.0)) throw std::invalid_argument("distortion eta_min must lie in (0,1]");
    if (!(safe_distance > 0.0)) throw std::invalid_argument("distortion safe_distance must be > 0");
  }
};

/// eta(d) = clamp(d / d_safe, eta_min, 1).
inline double adaptive_eta(double distance, const DistortionConfig& cfg) {
  return std::clamp(distance / cfg.safe_distance, cfg.eta_min, 1.0);
}

inline double distort_fraction(double tau, const DistortionConfig& cfg, std::optional<double> distance = std::nullopt) {
  detail::require_open_fraction(tau, "distort_fraction");
  switch (cfg.kind) {
    case DistortionKind::identity:
      return tau;
    case DistortionKind::cvar:
      return cfg.eta * tau;
    case DistortionKind::adaptive_cvar:
      if (!distance) throw std::invalid_argument("adaptive CVaR distortion needs a nearest-obstacle distance");
      return adaptive_eta(*distance, cfg) * tau;
  }
  return tau;
}

}  // namespace rqiqn::robust
