#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rqiqn/autodiff/mlp.hpp"
#include "rqiqn/autodiff/optimizer.hpp"
#include "rqiqn/autodiff/tape.hpp"
#include "rqiqn/agent/quantile_network.hpp"

using namespace rqiqn;
using namespace rqiqn::ad;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Central-difference gradient of f with respect to every entry of x.
Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, Tensor x, double h = 1e-5) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(const Tensor& a, const Tensor& b) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

}  // namespace

TEST(Tensor, RejectsMismatchedValueCount) {
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<double>(5, 0.0)), ShapeError);
}

TEST(Tensor, ShapeErrorReportsBothShapes) {
  Tape t;
  const Var a = t.constant(Tensor::matrix(2, 3));
  const Var b = t.constant(Tensor::matrix(4, 5));
  try {
    matmul(a, b);
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4, 5]"), std::string::npos) << msg;
  }
}

TEST(ForwardOps, CosineBasisAtZeroIsAllOnes) {
  const double tau[] = {0.0};
  const Tensor c = cosine_basis(tau, 4);
  EXPECT_EQ(c.storage(), (std::vector<double>{1, 1, 1, 1}));
}

TEST(ForwardOps, CosineBasisAtOneAlternates) {
  const double tau[] = {1.0};
  const Tensor c = cosine_basis(tau, 3);
  EXPECT_DOUBLE_EQ(c[0], 1.0);
  EXPECT_DOUBLE_EQ(c[1], -1.0);
  EXPECT_DOUBLE_EQ(c[2], 1.0);
}

TEST(ForwardOps, RecurrenceCosineBasisMatchesDirectEvaluation) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> taus(50);
  for (double& t : taus) t = u(rng);
  const Tensor direct = cosine_basis(taus, 64);
  const Tensor fast = agent::fast_cosine_basis(taus, 64);
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_NEAR(direct[i], fast[i], 1e-12);
}

TEST(ForwardOps, Rectifier) {
  Tape t;
  const Var x = t.constant(Tensor(Shape{3}, std::vector<double>{-1, 0, 2}));
  EXPECT_EQ(t.value(rectifier(x)).storage(), (std::vector<double>{0, 0, 2}));
}

TEST(ForwardOps, MatmulAddHadamardMean) {
  Tape t;
  const Var a = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const Var b = t.constant(Tensor::matrix(2, 2, {5, 6, 7, 8}));
  EXPECT_EQ(t.value(matmul(a, b)).storage(), (std::vector<double>{19, 22, 43, 50}));
  EXPECT_EQ(t.value(add(a, b)).storage(), (std::vector<double>{6, 8, 10, 12}));
  EXPECT_EQ(t.value(hadamard(a, b)).storage(), (std::vector<double>{5, 12, 21, 32}));
  EXPECT_DOUBLE_EQ(t.value(mean(a))[0], 2.5);
  const Var bias = t.constant(Tensor::matrix(1, 2, {10, 20}));
  EXPECT_EQ(t.value(add(a, bias)).storage(), (std::vector<double>{11, 22, 13, 24}));
}

TEST(Backward, SquareAtThree) {
  Tape t;
  const Var x = t.variable(Tensor::scalar(3.0));
  const Var y = hadamard(x, x);
  t.backward(y);
  EXPECT_DOUBLE_EQ(t.grad(x)[0], 6.0);
}

TEST(Backward, RectifierDeadRegionAndKink) {
  Tape t;
  const Var x = t.variable(Tensor(Shape{2}, std::vector<double>{-1.0, 0.0}));
  t.backward(mean(rectifier(x)));
  EXPECT_DOUBLE_EQ(t.grad(x)[0], 0.0);
  EXPECT_DOUBLE_EQ(t.grad(x)[1], 0.0);
}

TEST(Backward, RejectsNonScalarOutput) {
  Tape t;
  const Var x = t.variable(Tensor::matrix(2, 2));
  EXPECT_THROW(t.backward(x), ShapeError);
}

TEST(Backward, ConstantsReceiveNoGradient) {
  Tape t;
  const Var c = t.constant(Tensor::matrix(1, 2, {1, 2}));
  const Var w = t.variable(Tensor::matrix(2, 1, {3, 4}));
  t.backward(mean(matmul(c, w)));
  EXPECT_FALSE(t.requires_grad(c));
  EXPECT_EQ(t.grad(w).storage(), (std::vector<double>{1, 2}));
}

// Every differentiable op against central differences on 100 random inputs.
TEST(Backward, EveryOpMatchesCentralDifferences) {
  struct Case {
    const char* name;
    std::size_t rows, cols;        // shape of the differentiated input
    std::function<Var(Var)> op;
  };
  Rng rng(17);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = dim(rng), k = dim(rng), m = dim(rng);
    const Tensor right = random_matrix(k, m, rng);
    const Tensor left = random_matrix(n, k, rng);
    const Tensor same = random_matrix(n, k, rng);
    const Tensor rows = random_matrix(n, k, rng);
    const std::vector<Case> cases{
        {"matmul-left", n, k, [&](Var x) { return matmul(x, x.tape->constant(right)); }},
        {"matmul-right", k, m, [&](Var x) { return matmul(x.tape->constant(left), x); }},
        {"add", n, k, [&](Var x) { return add(x, x.tape->constant(same)); }},
        {"add-bias", 1, k, [&](Var x) { return add(x.tape->constant(rows), x); }},
        {"hadamard", n, k, [&](Var x) { return hadamard(x, x); }},
        {"rectifier", n, k, [&](Var x) { return rectifier(x); }},
        {"scale", n, k, [&](Var x) { return scale(x, -2.5); }},
        {"repeat", n, k, [&](Var x) { return repeat_rows(x, 3); }},
        {"gather", n, k, [&](Var x) {
           std::vector<std::size_t> cols(n);
           for (std::size_t i = 0; i < n; ++i) cols[i] = (i * 7 + 3) % k;
           return gather_columns(x, cols);
         }},
    };
    for (const Case& c : cases) {
      const Tensor x0 = random_matrix(c.rows, c.cols, rng);
      const std::uint64_t readout_seed = rng();
      // A random linear readout keeps the scalar sensitive to every entry.
      const auto objective = [&](Tape& t, Var x) {
        const Var v = c.op(x);
        Rng rr(readout_seed);
        const Tensor& val = t.value(v);
        return mean(hadamard(v, t.constant(random_matrix(val.rows(), val.cols(), rr))));
      };
      Tape t;
      const Var xv = t.variable(x0);
      t.backward(objective(t, xv));
      const Tensor numeric = numeric_gradient(
          [&](const Tensor& x) {
            Tape tp;
            return tp.value(objective(tp, tp.variable(x)))[0];
          },
          x0);
      EXPECT_LT(relative_error(t.grad(xv), numeric), 1e-4) << c.name << " trial " << trial;
    }
  }
}

TEST(Backward, TwoLayerMlpMatchesCentralDifferences) {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    MlpParams net({3, 5, 2}, false, rng);
    const Tensor input = random_matrix(4, 3, rng);
    const auto loss_of = [&](const MlpParams& p) {
      Tape t;
      const BoundMlp b = bind(t, p, false);
      const Var y = forward(b, t.constant(input));
      return t.value(mean(hadamard(y, y)))[0];
    };
    Tape t;
    const BoundMlp b = bind(t, net, true);
    const Var y = forward(b, t.constant(input));
    t.backward(mean(hadamard(y, y)));
    const auto grads = gradients(t, b);
    std::vector<ParamRef> params;
    net.collect("net", params);
    for (std::size_t p = 0; p < params.size(); ++p) {
      const Tensor numeric = numeric_gradient(
          [&](const Tensor& x) {
            const Tensor saved = *params[p].tensor;
            *params[p].tensor = x;
            const double v = loss_of(net);
            *params[p].tensor = saved;
            return v;
          },
          *params[p].tensor);
      EXPECT_LT(relative_error(grads[p], numeric), 1e-4) << params[p].name << " trial " << trial;
    }
  }
}

TEST(Backward, IsLinearInTheOutput) {
  Rng rng(31);
  const Tensor x0 = random_matrix(3, 4, rng);
  const Tensor w = random_matrix(4, 2, rng);
  const double a = 1.75, b = -0.5;
  const auto grad_of = [&](double ca, double cb) {
    Tape t;
    const Var x = t.variable(x0);
    const Var f = mean(matmul(x, t.constant(w)));
    const Var g = mean(hadamard(x, x));
    t.backward(add(scale(f, ca), scale(g, cb)));
    return t.grad(x);
  };
  const Tensor combined = grad_of(a, b);
  const Tensor gf = grad_of(1.0, 0.0);
  const Tensor gg = grad_of(0.0, 1.0);
  for (std::size_t i = 0; i < combined.size(); ++i) EXPECT_NEAR(combined[i], a * gf[i] + b * gg[i], 1e-14);
}

TEST(Backward, DeterministicAcrossRuns) {
  const auto run = [] {
    Rng rng(5);
    MlpParams net({2, 8, 1}, false, rng);
    Tape t;
    const BoundMlp b = bind(t, net, true);
    t.backward(mean(forward(b, t.constant(random_matrix(6, 2, rng)))));
    return gradients(t, b);
  };
  EXPECT_EQ(run(), run());
}

TEST(Mlp, ParameterCountAndNames) {
  Rng rng(1);
  MlpParams net({3, 4, 2}, false, rng);
  EXPECT_EQ(net.parameter_count(), 3u * 4 + 4 + 4 * 2 + 2);
  std::vector<ParamRef> refs;
  net.collect("q", refs);
  ASSERT_EQ(refs.size(), 4u);
  EXPECT_EQ(refs[0].name, "q.layer0.weight");
  EXPECT_EQ(refs[3].name, "q.layer1.bias");
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Tensor w = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor before = w;
  OptimizerState s;
  const ParamRef p[] = {{"w", &w}};
  const Tensor g[] = {Tensor::matrix(2, 2)};
  adam_step(p, g, s);
  EXPECT_EQ(w, before);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (const double grad : {3.0, -0.01}) {
    Tensor w = Tensor::scalar(0.5);
    OptimizerState s;
    s.config.learning_rate = 1e-3;
    const ParamRef p[] = {{"w", &w}};
    const Tensor g[] = {Tensor::scalar(grad)};
    adam_step(p, g, s);
    // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
    const double expected = 0.5 - 1e-3 * grad / (std::abs(grad) + 1e-8);
    EXPECT_NEAR(w[0], expected, 1e-15);
    EXPECT_NEAR(std::abs(w[0] - 0.5), 1e-3, 1e-8);
  }
}

TEST(Adam, NonFiniteGradientNamesTheParameter) {
  Tensor w = Tensor::scalar(0.0);
  OptimizerState s;
  const ParamRef p[] = {{"head.layer1.bias", &w}};
  const Tensor g[] = {Tensor::scalar(std::nan(""))};
  try {
    adam_step(p, g, s);
    FAIL();
  } catch (const NonFiniteGradient& e) {
    EXPECT_NE(std::string(e.what()).find("head.layer1.bias"), std::string::npos);
  }
}

TEST(Adam, IdenticalRunsAreBitwiseIdentical) {
  const auto run = [] {
    Rng rng(9);
    MlpParams net({2, 4, 1}, false, rng);
    OptimizerState s;
    for (int i = 0; i < 20; ++i) {
      Tape t;
      const BoundMlp b = bind(t, net, true);
      const Var y = forward(b, t.constant(random_matrix(3, 2, rng)));
      t.backward(mean(hadamard(y, y)));
      auto g = gradients(t, b);
      std::vector<ParamRef> refs;
      net.collect("n", refs);
      adam_step(refs, g, s);
    }
    return net;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, GlobalNormClipping) {
  std::vector<Tensor> g{Tensor::scalar(3.0), Tensor::scalar(4.0)};
  clip_by_global_norm(g, 1.0);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
  std::vector<Tensor> h{Tensor::scalar(3.0)};
  clip_by_global_norm(h, 0.0);
  EXPECT_EQ(h[0][0], 3.0);
}
