#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rqiqn/autodiff/mlp.hpp"
#include "rqiqn/autodiff/tensor.hpp"

namespace rqiqn::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment state; moment buffers are created lazily on the first step
/// to match the parameter shapes.
struct OptimizerState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  friend bool operator==(const OptimizerState& a, const OptimizerState& b) {
    return a.first_moment == b.first_moment && a.second_moment == b.second_moment && a.step == b.step;
  }
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient in parameter '" + param + "'") {}
};

inline double global_norm(std::span<const Tensor> grads) {
  double s = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.values()) s += v * v;
  }
  return std::sqrt(s);
}

/// Rescales grads so their joint L2 norm is at most max_norm. No-op for max_norm <= 0.
inline void clip_by_global_norm(std::span<Tensor> grads, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = global_norm(grads);
  if (norm <= max_norm || norm == 0.0) return;
  const double c = max_norm / norm;
  for (Tensor& g : grads) {
    for (double& v : g.values()) v *= c;
  }
}

inline void adam_step(std::span<const ParamRef> params, std::span<const Tensor> grads, OptimizerState& state) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].tensor->shape()) {
      throw ShapeError("adam_step(" + params[i].name + ")", params[i].tensor->shape(), grads[i].shape());
    }
    if (!grads[i].all_finite()) throw NonFiniteGradient(params[i].name);
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const ParamRef& p : params) {
      state.first_moment.emplace_back(p.tensor->shape(), 0.0);
      state.second_moment.emplace_back(p.tensor->shape(), 0.0);
    }
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].tensor;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      w[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace rqiqn::ad
