#pragma once

// Brute-force references for the quantile-slot view of the TD loss. These
// are deliberately independent of the closed-form correction: the robust
// minimiser is found by grid search over the worst-case objective.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "rqiqn/loss/quantile_loss.hpp"

namespace rqiqn::verify {

/// Uniform empirical law over finite samples.
struct EmpiricalTargetLaw {
  std::vector<double> samples;

  void validate() const {
    if (samples.empty()) throw std::invalid_argument("EmpiricalTargetLaw: no samples");
    for (double y : samples) {
      if (!std::isfinite(y)) throw std::invalid_argument("EmpiricalTargetLaw: non-finite sample");
    }
  }
};

/// E_{Y ~ law}[rho_tau(Y - q)].
inline double empirical_check_loss(const EmpiricalTargetLaw& law, double q, double tau) {
  double s = 0.0;
  for (double y : law.samples) s += loss::check_loss(y - q, tau);
  return s / static_cast<double>(law.samples.size());
}

/// Lower endpoint of argmin_q E[rho_tau(Y - q)]: the smallest order
/// statistic y_(k) with k >= tau * n.
inline double empirical_quantile_slot(const EmpiricalTargetLaw& law, double tau) {
  law.validate();
  if (!(tau > 0.0 && tau < 1.0)) throw std::domain_error("empirical_quantile_slot: tau outside (0,1)");
  std::vector<double> y = law.samples;
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(y.size());
  for (std::size_t k = 1; k <= y.size(); ++k) {
    if (static_cast<double>(k) >= tau * n) return y[k - 1];
  }
  return y.back();
}

struct Coverage {
  double below;     // P(Y < q)
  double at_most;   // P(Y <= q)
  [[nodiscard]] bool holds(double tau) const { return below <= tau && tau <= at_most; }
};

inline Coverage coverage(const EmpiricalTargetLaw& law, double q) {
  std::size_t lt = 0, le = 0;
  for (double y : law.samples) {
    lt += y < q ? 1 : 0;
    le += y <= q ? 1 : 0;
  }
  const double n = static_cast<double>(law.samples.size());
  return {static_cast<double>(lt) / n, static_cast<double>(le) / n};
}

/// Worst-case expected check loss over the type-infinity Wasserstein ball of
/// radius epsilon: every atom may move independently by at most epsilon, and
/// the per-atom maximum of the convex loss sits at an end of [-eps, eps].
inline double dro_worst_case_loss(const EmpiricalTargetLaw& law, double q, double tau, double epsilon) {
  law.validate();
  if (!(epsilon >= 0.0)) throw std::domain_error("dro_worst_case_loss: epsilon must be >= 0");
  double s = 0.0;
  for (double y : law.samples) {
    s += std::max(loss::check_loss(y + epsilon - q, tau), loss::check_loss(y - epsilon - q, tau));
  }
  return s / static_cast<double>(law.samples.size());
}

struct DroOracleConfig {
  double resolution = 1e-3;
  double tolerance = 1e-3;  // agreement the caller wants; the grid must be at least this fine
  double margin = 1.0;      // grid spans [min y - eps - margin, max y + eps + margin]
};

class GridTooCoarse : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Grid minimiser of dro_worst_case_loss. Among grid points within rounding
/// of the minimum the smallest is returned.
inline double dro_robust_minimizer_bruteforce(const EmpiricalTargetLaw& law, double tau, double epsilon,
                                              const DroOracleConfig& cfg = {}) {
  law.validate();
  if (!(cfg.resolution > 0.0)) throw GridTooCoarse("DRO oracle: resolution must be positive");
  if (cfg.resolution > cfg.tolerance) throw GridTooCoarse("DRO oracle: grid resolution exceeds requested tolerance");
  const auto [lo_it, hi_it] = std::minmax_element(law.samples.begin(), law.samples.end());
  const double lo = *lo_it - epsilon - cfg.margin;
  const double hi = *hi_it + epsilon + cfg.margin;
  const auto points = static_cast<std::size_t>(std::ceil((hi - lo) / cfg.resolution)) + 1;
  std::vector<double> values(points);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points; ++i) {
    values[i] = dro_worst_case_loss(law, lo + static_cast<double>(i) * cfg.resolution, tau, epsilon);
    best = std::min(best, values[i]);
  }
  const double slack = 1e-12 * (1.0 + std::abs(best));
  for (std::size_t i = 0; i < points; ++i) {
    if (values[i] <= best + slack) return lo + static_cast<double>(i) * cfg.resolution;
  }
  return lo;
}

}  // namespace rqiqn::verify
