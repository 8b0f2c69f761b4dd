#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rqiqn/autodiff/tape.hpp"
#include "rqiqn/autodiff/tensor.hpp"

namespace rqiqn {

using Rng = std::mt19937_64;

}  // namespace rqiqn

namespace rqiqn::ad {

/// Named reference to a trainable tensor owned by some network.
struct ParamRef {
  std::string name;
  Tensor* tensor;
};

struct ConstParamRef {
  std::string name;
  const Tensor* tensor;
};

/// Fully connected rectifier network. widths = {in, hidden..., out}.
struct MlpParams {
  std::vector<std::size_t> widths;
  std::vector<Tensor> weights;  // [in x out] each
  std::vector<Tensor> biases;   // [1 x out] each
  bool activate_output = false;

  MlpParams() = default;

  MlpParams(std::vector<std::size_t> layer_widths, bool rectify_output, Rng& rng)
      : widths(std::move(layer_widths)), activate_output(rectify_output) {
    if (widths.size() < 2) throw std::invalid_argument("MlpParams: need at least input and output widths");
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const std::size_t in = widths[l], out = widths[l + 1];
      if (in == 0 || out == 0) throw std::invalid_argument("MlpParams: zero layer width");
      // Uniform fan-in initialization, as in common deep learning defaults.
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> u(-bound, bound);
      Tensor w = Tensor::matrix(in, out);
      for (double& v : w.values()) v = u(rng);
      Tensor b = Tensor::matrix(1, out);
      for (double& v : b.values()) v = u(rng);
      weights.push_back(std::move(w));
      biases.push_back(std::move(b));
    }
  }

  [[nodiscard]] std::size_t layers() const noexcept { return weights.size(); }
  [[nodiscard]] std::size_t input_width() const { return widths.front(); }
  [[nodiscard]] std::size_t output_width() const { return widths.back(); }

  [[nodiscard]] std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  void collect(const std::string& prefix, std::vector<ParamRef>& out) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back({prefix + ".layer" + std::to_string(l) + ".weight", &weights[l]});
      out.push_back({prefix + ".layer" + std::to_string(l) + ".bias", &biases[l]});
    }
  }

  void collect(const std::string& prefix, std::vector<ConstParamRef>& out) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.push_back({prefix + ".layer" + std::to_string(l) + ".weight", &weights[l]});
      out.push_back({prefix + ".layer" + std::to_string(l) + ".bias", &biases[l]});
    }
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Parameters placed on a tape, in the same order as MlpParams::collect.
struct BoundMlp {
  const MlpParams* params;
  std::vector<Var> vars;
};

inline BoundMlp bind(Tape& tape, const MlpParams& params, bool trainable) {
  BoundMlp bound{&params, {}};
  bound.vars.reserve(2 * params.layers());
  for (std::size_t l = 0; l < params.layers(); ++l) {
    bound.vars.push_back(trainable ? tape.variable(params.weights[l]) : tape.constant(params.weights[l]));
    bound.vars.push_back(trainable ? tape.variable(params.biases[l]) : tape.constant(params.biases[l]));
  }
  return bound;
}

inline Var forward(const BoundMlp& net, Var input) {
  Var h = input;
  const std::size_t n = net.params->layers();
  for (std::size_t l = 0; l < n; ++l) {
    h = add(matmul(h, net.vars[2 * l]), net.vars[2 * l + 1]);
    if (l + 1 < n || net.params->activate_output) h = rectifier(h);
  }
  return h;
}

/// Gradients of the bound parameters after Tape::backward, in collect order.
inline std::vector<Tensor> gradients(Tape& tape, const BoundMlp& net) {
  std::vector<Tensor> out;
  out.reserve(net.vars.size());
  for (Var v : net.vars) out.push_back(tape.grad(v));
  return out;
}

}  // namespace rqiqn::ad
