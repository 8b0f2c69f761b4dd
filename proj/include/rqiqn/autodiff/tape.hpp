#pragma once

#include <cassert>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rqiqn/autodiff/tensor.hpp"

namespace rqiqn::ad {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so every input
/// id precedes its consumer and backward() is a single reverse sweep.
class Tape {
 public:
  // Receives the tape and the id of the node whose gradient is complete.
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) { return push(std::move(value), false, {}); }
  Var variable(Tensor value) { return push(std::move(value), true, {}); }

  /// Appends a computed node. A backward rule is kept only when some input
  /// requires a gradient.
  Var record(Tensor value, std::span<const Var> inputs, Backward backward) {
    bool needs = false;
    for (const Var& in : inputs) {
      check_owned(in);
      needs = needs || nodes_[in.id].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  [[nodiscard]] const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  [[nodiscard]] bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient of the last backward() output w.r.t. v; zeros if v is untracked.
  [[nodiscard]] const Tensor& grad(Var v) {
    Node& n = nodes_.at(v.id);
    ensure_grad(n);
    return n.grad;
  }

  Tensor& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    ensure_grad(n);
    return n.grad;
  }

  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

  void backward(Var output) {
    check_owned(output);
    const Tensor& out = nodes_[output.id].value;
    if (out.size() != 1) throw ShapeError("backward", out.shape(), "is not a scalar");
    for (Node& n : nodes_) {
      if (n.requires_grad) {
        ensure_grad(n);
        n.grad.fill(0.0);
      }
    }
    if (!nodes_[output.id].requires_grad) return;
    nodes_[output.id].grad[0] = 1.0;
    for (std::size_t id = output.id + 1; id-- > 0;) {
      if (nodes_[id].backward) nodes_[id].backward(*this, id);
    }
  }

  void clear() noexcept { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var push(Tensor value, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, std::move(backward)});
    return Var{this, nodes_.size() - 1};
  }

  void check_owned(Var v) const {
    if (v.tape != this || v.id >= nodes_.size()) throw std::invalid_argument("Var does not belong to this tape");
  }

  static void ensure_grad(Node& n) {
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape(), 0.0);
  }

  std::vector<Node> nodes_;
};

namespace detail {

inline void require_matrix(const std::string& op, const Tensor& t) {
  if (t.shape().empty() || t.shape().size() > 2) throw ShapeError(op, t.shape(), "is not a matrix");
}

}  // namespace detail

/// [n x k] . [k x m] -> [n x m]
inline Var matmul(Var a, Var b) {
  Tape& tape = *a.tape;
  const Tensor& x = tape.value(a);
  const Tensor& w = tape.value(b);
  detail::require_matrix("matmul", x);
  detail::require_matrix("matmul", w);
  const std::size_t n = x.rows(), k = x.cols(), m = w.cols();
  if (w.rows() != k) throw ShapeError("matmul", x.shape(), w.shape());
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* __restrict orow = &out[i * m];
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x[i * k + p];
      const double* __restrict wrow = &w[p * m];
      for (std::size_t j = 0; j < m; ++j) orow[j] += xv * wrow[j];
    }
  }
  const Var ins[] = {a, b};
  return tape.record(std::move(out), ins, [a, b, n, k, m](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a.id);
      const Tensor& w = t.value(b);
      for (std::size_t i = 0; i < n; ++i) {
        const double* __restrict grow = &g[i * m];
        for (std::size_t p = 0; p < k; ++p) {
          const double* __restrict wrow = &w[p * m];
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * wrow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b.id);
      const Tensor& x = t.value(a);
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = &g[i * m];
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = x[i * k + p];
          double* __restrict gbrow = &gb[p * m];
          for (std::size_t j = 0; j < m; ++j) gbrow[j] += xv * grow[j];
        }
      }
    }
  });
}

/// Elementwise sum of equal shapes, or row broadcast when b has a single row
/// matching a's column count.
inline Var add(Var a, Var b) {
  Tape& tape = *a.tape;
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  const bool same = x.shape() == y.shape();
  const bool broadcast = !same && y.rows() == 1 && y.cols() == x.cols() && x.size() % y.size() == 0;
  if (!same && !broadcast) throw ShapeError("add", x.shape(), y.shape());
  Tensor out = x;
  const std::size_t m = y.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i % m];
  const Var ins[] = {a, b};
  return tape.record(std::move(out), ins, [a, b, m](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % m] += g[i];
    }
  });
}

inline Var hadamard(Var a, Var b) {
  Tape& tape = *a.tape;
  const Tensor& x = tape.value(a);
  const Tensor& y = tape.value(b);
  if (x.shape() != y.shape()) throw ShapeError("hadamard", x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  const Var ins[] = {a, b};
  return tape.record(std::move(out), ins, [a, b](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a.id);
      const Tensor& y = t.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b.id);
      const Tensor& x = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

/// max(0, x); the derivative at exactly 0 is taken as 0.
inline Var rectifier(Var a) {
  Tape& tape = *a.tape;
  Tensor out = tape.value(a);
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  const Var ins[] = {a};
  return tape.record(std::move(out), ins, [a](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) ga[i] += g[i];
    }
  });
}

inline Var scale(Var a, double c) {
  Tape& tape = *a.tape;
  Tensor out = tape.value(a);
  for (double& v : out.values()) v *= c;
  const Var ins[] = {a};
  return tape.record(std::move(out), ins, [a, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

/// Mean of all entries as a scalar.
inline Var mean(Var a) {
  Tape& tape = *a.tape;
  const Tensor& x = tape.value(a);
  if (x.empty()) throw ShapeError("mean", x.shape(), "is empty");
  double s = 0.0;
  for (double v : x.values()) s += v;
  const double n = static_cast<double>(x.size());
  const Var ins[] = {a};
  return tape.record(Tensor::scalar(s / n), ins, [a, n](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0] / n;
    Tensor& ga = t.grad_buffer(a.id);
    for (double& v : ga.values()) v += g;
  });
}

/// Repeats each row of a `times` times consecutively: [n x m] -> [n*times x m].
inline Var repeat_rows(Var a, std::size_t times) {
  Tape& tape = *a.tape;
  const Tensor& x = tape.value(a);
  detail::require_matrix("repeat_rows", x);
  const std::size_t n = x.rows(), m = x.cols();
  Tensor out = Tensor::matrix(n * times, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < times; ++r) {
      std::copy_n(&x[i * m], m, &out[(i * times + r) * m]);
    }
  }
  const Var ins[] = {a};
  return tape.record(std::move(out), ins, [a, n, m, times](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < times; ++r) {
        const double* grow = &g[(i * times + r) * m];
        for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += grow[j];
      }
    }
  });
}

/// Picks one column per row: out[i] = a[i, columns[i]], shape [n x 1].
inline Var gather_columns(Var a, std::vector<std::size_t> columns) {
  Tape& tape = *a.tape;
  const Tensor& x = tape.value(a);
  detail::require_matrix("gather_columns", x);
  const std::size_t n = x.rows(), m = x.cols();
  if (columns.size() != n) throw ShapeError("gather_columns", x.shape(), "needs one column index per row");
  Tensor out = Tensor::matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (columns[i] >= m) throw ShapeError("gather_columns", x.shape(), "column index out of range");
    out[i] = x[i * m + columns[i]];
  }
  const Var ins[] = {a};
  return tape.record(std::move(out), ins, [a, m, cols = std::move(columns)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_buffer(self);
    Tensor& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < cols.size(); ++i) ga[i * m + cols[i]] += g[i];
  });
}

/// Cosine features of quantile fractions: row r is [cos(pi * i * tau_r)] for
/// i = 0..n-1. Fractions are inputs, not parameters, so the result is a
/// constant on the tape.
inline Tensor cosine_basis(std::span<const double> taus, std::size_t n) {
  Tensor out = Tensor::matrix(taus.size(), n);
  for (std::size_t r = 0; r < taus.size(); ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      out[r * n + i] = std::cos(std::numbers::pi * static_cast<double>(i) * taus[r]);
    }
  }
  return out;
}

inline Var cosine_basis(Tape& tape, std::span<const double> taus, std::size_t n) {
  return tape.constant(cosine_basis(taus, n));
}

}  // namespace rqiqn::ad
