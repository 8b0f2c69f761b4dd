#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rqiqn/loss/quantile_loss.hpp"

using namespace rqiqn::loss;

TEST(CheckLoss, Examples) {
  EXPECT_DOUBLE_EQ(check_loss(1.0, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(check_loss(-1.0, 0.25), 0.75);
  for (double t : {0.1, 0.5, 0.9}) EXPECT_EQ(check_loss(0.0, t), 0.0);
}

TEST(CheckLoss, SubgradientAtZeroIsTau) { EXPECT_DOUBLE_EQ(check_loss_derivative(0.0, 0.3), 0.3); }

TEST(CheckLoss, AlternateFormAndConvexity) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10.0, 10.0), t(0.001, 0.999);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng), y = u(rng), tau = t(rng);
    const double weight = std::abs(tau - (x < 0.0 ? 1.0 : 0.0));
    EXPECT_NEAR(check_loss(x, tau), weight * std::abs(x), 1e-12);
    EXPECT_GE(check_loss(x, tau), 0.0);
    EXPECT_LE(check_loss(0.5 * (x + y), tau), 0.5 * (check_loss(x, tau) + check_loss(y, tau)) + 1e-12);
  }
}

TEST(Huber, Examples) {
  EXPECT_DOUBLE_EQ(huber_kernel(0.5, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(huber_kernel(2.0, 1.0), 1.5);
  for (double k : {0.3, 1.0, 4.0}) EXPECT_DOUBLE_EQ(huber_kernel(-k, k), 0.5 * k * k);
}

TEST(Huber, NonPositiveKappaIsAConfigError) {
  EXPECT_THROW(huber_kernel(1.0, 0.0), ConfigError);
  EXPECT_THROW(huber_kernel(1.0, -1.0), ConfigError);
  EXPECT_THROW(validate(LossConfig{LossKind::quantile_huber, 0.0}), ConfigError);
}

TEST(Huber, ContinuousAndDifferentiableAtKappa) {
  const double k = 1.3, h = 1e-7;
  EXPECT_NEAR(huber_kernel(k - h, k), huber_kernel(k + h, k), 1e-6);
  EXPECT_NEAR(huber_kernel_derivative(k - h, k), huber_kernel_derivative(k + h, k), 1e-6);
}

TEST(QuantileHuber, Examples) {
  EXPECT_DOUBLE_EQ(quantile_huber(2.0, 0.5, 1.0), 0.75);
  EXPECT_DOUBLE_EQ(quantile_huber(-2.0, 0.25, 1.0), 1.125);
  EXPECT_DOUBLE_EQ(quantile_huber(0.5, 0.9, 1.0), 0.1125);
}

TEST(QuantileHuber, ScaledByWeightRecoversHuberKernel) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5.0, 5.0), t(0.01, 0.99), k(0.1, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng), tau = t(rng), kappa = k(rng);
    if (x == 0.0) continue;
    const double w = std::abs(tau - (x < 0.0 ? 1.0 : 0.0));
    EXPECT_NEAR(quantile_huber(x, tau, kappa) * kappa / w, huber_kernel(x, kappa), 1e-9);
  }
}

TEST(QuantileHuber, ApproachesCheckLossAsKappaVanishes) {
  const double kappa = 1e-6;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0), t(0.01, 0.99);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng), tau = t(rng);
    if (std::abs(x) < kappa) continue;
    EXPECT_LE(std::abs(quantile_huber(x, tau, kappa) - check_loss(x, tau)), kappa / 2.0 + 1e-15);
  }
}

TEST(Aggregate, Examples) {
  const LossConfig check{LossKind::check, 1.0};
  EXPECT_DOUBLE_EQ(aggregate_loss(TDErrorMatrix{{0.9}, {0.5}, {0.5}}, check), 0.45);
  EXPECT_EQ(aggregate_loss(TDErrorMatrix{{0, 0, 0, 0}, {0.3, 0.6}, {0.2, 0.8}}, check), 0.0);
  EXPECT_DOUBLE_EQ(aggregate_loss(TDErrorMatrix{{1, 1, 1, 1}, {0.25, 0.75}, {0.4, 0.6}}, check), 1.0);
}

TEST(Aggregate, EmptyOrMalformedMatrixIsAnError) {
  const LossConfig check{};
  EXPECT_THROW(aggregate_loss(TDErrorMatrix{{}, {}, {}}, check), std::invalid_argument);
  EXPECT_THROW(aggregate_loss(TDErrorMatrix{{1, 2}, {0.5}, {0.5}}, check), std::invalid_argument);
  EXPECT_THROW(aggregate_loss(TDErrorMatrix{{1}, {1.0}, {0.5}}, check), std::domain_error);
}

TEST(Aggregate, PositivelyHomogeneousUnderCheckLoss) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0), t(0.01, 0.99), c(0.1, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    TDErrorMatrix m;
    for (int i = 0; i < 4; ++i) m.current_fractions.push_back(t(rng));
    for (int j = 0; j < 3; ++j) m.target_fractions.push_back(t(rng));
    for (int k = 0; k < 12; ++k) m.delta.push_back(u(rng));
    const double scale = c(rng);
    TDErrorMatrix scaled = m;
    for (double& d : scaled.delta) d *= scale;
    const LossConfig cfg{LossKind::check, 1.0};
    EXPECT_NEAR(aggregate_loss(scaled, cfg), scale * aggregate_loss(m, cfg), 1e-12 * (1.0 + aggregate_loss(scaled, cfg)));
  }
}

TEST(Aggregate, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0), t(0.01, 0.99);
  for (const LossKind kind : {LossKind::check, LossKind::quantile_huber}) {
    const LossConfig cfg{kind, 1.0};
    TDErrorMatrix m;
    for (int i = 0; i < 3; ++i) m.current_fractions.push_back(t(rng));
    for (int j = 0; j < 2; ++j) m.target_fractions.push_back(t(rng));
    for (int k = 0; k < 6; ++k) m.delta.push_back(u(rng));
    const auto g = aggregate_loss_gradient(m, cfg);
    for (std::size_t k = 0; k < m.delta.size(); ++k) {
      TDErrorMatrix up = m, down = m;
      up.delta[k] += 1e-6;
      down.delta[k] -= 1e-6;
      EXPECT_NEAR(g[k], (aggregate_loss(up, cfg) - aggregate_loss(down, cfg)) / 2e-6, 1e-6);
    }
  }
}
