#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rqiqn/autodiff/mlp.hpp"
#include "rqiqn/autodiff/tape.hpp"
#include "rqiqn/loss/quantile_loss.hpp"
#include "rqiqn/robust/correction.hpp"

namespace rqiqn::agent {

/// Fractions are drawn from (margin, 1 - margin) so the raw finite-order
/// correction stays finite.
inline constexpr double kFractionMargin = 1e-6;

inline double sample_fraction(Rng& rng) {
  std::uniform_real_distribution<double> u(kFractionMargin, 1.0 - kFractionMargin);
  return u(rng);
}

inline std::vector<double> sample_fractions(std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (double& t : out) t = sample_fraction(rng);
  return out;
}

/// Returns values(k, a) for the given fraction row set, shape [K x actions].
template <class F>
concept QuantileFunction = requires(const F& f, std::span<const double> taus) {
  { f(taus) } -> std::convertible_to<ad::Tensor>;
};

/// K action-selection fractions drawn uniformly and passed through the distortion.
inline std::vector<double> selection_fractions(std::size_t k, const robust::DistortionConfig& distortion,
                                              std::optional<double> context, Rng& rng) {
  if (k == 0) throw std::invalid_argument("select_action: K must be >= 1");
  std::vector<double> taus(k);
  for (double& t : taus) t = robust::distort_fraction(sample_fraction(rng), distortion, context);
  return taus;
}

/// argmax_a of the column means of rows [first, first + k) of z; ties go to
/// the lowest action index.
inline int greedy_from_quantiles(const ad::Tensor& z, std::size_t first, std::size_t k) {
  int best = 0;
  double best_mean = 0.0;
  for (std::size_t a = 0; a < z.cols(); ++a) {
    double s = 0.0;
    for (std::size_t r = first; r < first + k; ++r) s += z(r, a);
    const double m = s / static_cast<double>(k);
    if (a == 0 || m > best_mean) {
      best = static_cast<int>(a);
      best_mean = m;
    }
  }
  return best;
}

/// Greedy action under the mean of K distorted quantile samples.
/// Single-action problems draw no fractions.
template <QuantileFunction F>
int select_action(const F& quantiles, std::size_t actions, std::size_t k, const robust::DistortionConfig& distortion,
                  std::optional<double> context, Rng& rng) {
  if (k == 0) throw std::invalid_argument("select_action: K must be >= 1");
  if (actions <= 1) return 0;
  const std::vector<double> taus = selection_fractions(k, distortion, context, rng);
  const ad::Tensor z = quantiles(std::span<const double>(taus));
  if (z.rows() != k || z.cols() != actions) throw ad::ShapeError("select_action", z.shape(), "is not K x actions");
  return greedy_from_quantiles(z, 0, k);
}

/// Robust pairwise TD residuals of one transition:
///   delta_ij = r + gamma Z_{tau'_j}(s', a*) + shift_i - Z_{tau_i}(s, a)
/// with the bootstrap term dropped at terminal transitions. An empty
/// `shifts` gives the plain residual r + gamma Z' - Z.
inline loss::TDErrorMatrix robust_td_matrix(double reward, bool done, double gamma,
                                            std::span<const double> next_quantiles,
                                            std::span<const double> current_quantiles,
                                            std::span<const double> current_fractions,
                                            std::span<const double> target_fractions,
                                            std::span<const double> shifts = {}) {
  const std::size_t n = current_quantiles.size(), np = next_quantiles.size();
  if (current_fractions.size() != n || target_fractions.size() != np || (!shifts.empty() && shifts.size() != n)) {
    throw std::invalid_argument("robust_td_matrix: inconsistent fraction/quantile counts");
  }
  loss::TDErrorMatrix m;
  m.current_fractions.assign(current_fractions.begin(), current_fractions.end());
  m.target_fractions.assign(target_fractions.begin(), target_fractions.end());
  m.delta.resize(n * np);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      const double target = done ? reward : reward + gamma * next_quantiles[j];
      m.delta[i * np + j] = shifts.empty() ? target - current_quantiles[i] : target + shifts[i] - current_quantiles[i];
    }
  }
  return m;
}

/// Per-fraction shifts Delta_i for the current fractions at radius epsilon.
inline std::vector<double> robust_shifts(std::span<const double> current_fractions, double epsilon,
                                         const robust::RobustConfig& cfg) {
  std::vector<double> out;
  out.reserve(current_fractions.size());
  for (double t : current_fractions) out.push_back(robust::residual_shift(t, epsilon, cfg));
  return out;
}

/// Target side of one batch, already evaluated (no gradient).
struct TargetBatch {
  std::vector<double> rewards;
  std::vector<char> done;
  std::vector<double> next_quantiles;    // B x N'
  std::vector<double> target_fractions;  // B x N'
  std::size_t target_count = 0;
};

/// Mean over the batch of the pairwise quantile loss, as a tape op on the
/// current quantiles `current` ([B*N x 1]). Only `current` receives gradient.
inline ad::Var pairwise_quantile_loss(ad::Var current, const TargetBatch& targets, std::vector<double> current_fractions,
                                      std::vector<double> shifts, double gamma, const loss::LossConfig& cfg) {
  ad::Tape& tape = *current.tape;
  const ad::Tensor& z = tape.value(current);
  const std::size_t batch = targets.rewards.size();
  const std::size_t np = targets.target_count;
  if (batch == 0 || np == 0) throw std::invalid_argument("pairwise_quantile_loss: empty batch");
  const std::size_t n = z.size() / batch;
  if (n * batch != z.size() || current_fractions.size() != z.size() || (!shifts.empty() && shifts.size() != z.size())) {
    throw ad::ShapeError("pairwise_quantile_loss", z.shape(), "does not match the batch layout");
  }

  std::vector<double> grad(z.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto span_of = [](const std::vector<double>& v, std::size_t off, std::size_t len) {
      return std::span<const double>(v).subspan(off, len);
    };
    const loss::TDErrorMatrix m = robust_td_matrix(
        targets.rewards[b], targets.done[b] != 0, gamma, span_of(targets.next_quantiles, b * np, np),
        z.values().subspan(b * n, n), span_of(current_fractions, b * n, n), span_of(targets.target_fractions, b * np, np),
        shifts.empty() ? std::span<const double>{} : span_of(shifts, b * n, n));
    const double l = loss::aggregate_loss(m, cfg);
    if (!std::isfinite(l)) throw std::runtime_error("non-finite TD loss at batch transition " + std::to_string(b));
    total += l;
    const std::vector<double> g = loss::aggregate_loss_gradient(m, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < np; ++j) s += g[i * np + j];
      // d delta_ij / d Z_i = -1
      grad[b * n + i] = -s / static_cast<double>(batch);
    }
  }
  const ad::Var ins[] = {current};
  return tape.record(ad::Tensor::scalar(total / static_cast<double>(batch)), ins,
                     [current, grad = std::move(grad)](ad::Tape& t, std::size_t self) {
                       const double up = t.grad_buffer(self)[0];
                       ad::Tensor& gz = t.grad_buffer(current.id);
                       for (std::size_t i = 0; i < grad.size(); ++i) gz[i] += up * grad[i];
                     });
}

/// One-step scalar TD loss for a single transition with Huber error.
inline double dqn_td_loss(double q_sa, double reward, bool done, double gamma, double max_next_q, double kappa) {
  const double target = done ? reward : reward + gamma * max_next_q;
  return loss::huber_kernel(target - q_sa, kappa);
}

/// Mean Huber TD loss as a tape op on q ([B x 1]) against constant targets.
inline ad::Var huber_td_loss(ad::Var q, std::vector<double> targets, double kappa) {
  ad::Tape& tape = *q.tape;
  const ad::Tensor& qv = tape.value(q);
  if (qv.size() != targets.size() || targets.empty()) throw ad::ShapeError("huber_td_loss", qv.shape(), "target count mismatch");
  const double n = static_cast<double>(targets.size());
  double total = 0.0;
  std::vector<double> grad(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double u = targets[i] - qv[i];
    total += loss::huber_kernel(u, kappa);
    grad[i] = -loss::huber_kernel_derivative(u, kappa) / n;
  }
  const ad::Var ins[] = {q};
  return tape.record(ad::Tensor::scalar(total / n), ins, [q, grad = std::move(grad)](ad::Tape& t, std::size_t self) {
    const double up = t.grad_buffer(self)[0];
    ad::Tensor& gq = t.grad_buffer(q.id);
    for (std::size_t i = 0; i < grad.size(); ++i) gq[i] += up * grad[i];
  });
}

}  // namespace rqiqn::agent
