#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "rqiqn/env/chain.hpp"

using namespace rqiqn::env;

namespace {

// Independent mixture CDF through std::erf.
double oracle_cdf(double x, double m, double s) {
  const auto phi = [](double z) { return 0.5 * (1.0 + std::erf(z / std::sqrt(2.0))); };
  return 0.5 * phi((x + m) / s) + 0.5 * phi((x - m) / s);
}

}  // namespace

TEST(Chain, StepsAreDeterministicUntilTheTerminalReward) {
  ChainConfig cfg;
  std::mt19937_64 rng(1);
  const ChainStep a = chain_step(0, cfg, rng);
  EXPECT_EQ(a.next_state, 1);
  EXPECT_EQ(a.reward, 0.0);
  EXPECT_FALSE(a.done);
  const ChainStep b = chain_step(1, cfg, rng);
  EXPECT_EQ(b.next_state, 2);
  EXPECT_EQ(b.reward, 0.0);
  EXPECT_FALSE(b.done);
  const ChainStep c = chain_step(2, cfg, rng);
  EXPECT_EQ(c.next_state, 3);
  EXPECT_TRUE(c.done);
}

TEST(Chain, InvalidStatesThrow) {
  ChainConfig cfg;
  std::mt19937_64 rng(1);
  EXPECT_THROW(chain_step(3, cfg, rng), std::out_of_range);
  EXPECT_THROW(chain_step(-1, cfg, rng), std::out_of_range);
  EXPECT_THROW(true_return_quantiles(3, cfg, std::vector<double>{0.5}), std::out_of_range);
}

TEST(Chain, ObservationIsOneHot) {
  EXPECT_EQ(chain_observation(2), (std::vector<double>{0, 0, 1, 0}));
}

TEST(Chain, MixtureMomentsMatchSamples) {
  ChainConfig cfg;
  std::mt19937_64 rng(3);
  const int n = 1'000'000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double r = chain_step(2, cfg, rng).reward;
    s += r;
    s2 += r * r;
  }
  const double mean = s / n, var = s2 / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 3.0 * std::sqrt(5.0 / n));
  EXPECT_NEAR(var, 5.0, 0.03);
}

TEST(Chain, QuantilesAgreeWithAnIndependentCdf) {
  ChainConfig cfg;
  EXPECT_NEAR(mixture_quantile(0.5, cfg), 0.0, 1e-12);
  for (double t : {0.01, 0.1, 0.25, 0.6, 0.9, 0.99}) {
    EXPECT_NEAR(oracle_cdf(mixture_quantile(t, cfg), 2.0, 1.0), t, 1e-12);
  }
  EXPECT_NEAR(mixture_quantile(0.9, cfg), -mixture_quantile(0.1, cfg), 1e-10);
}

TEST(Chain, ReturnQuantilesScaleByRemainingDiscount) {
  ChainConfig cfg;
  const std::vector<double> taus{0.1, 0.3, 0.7};
  const auto q0 = true_return_quantiles(0, cfg, taus);
  const auto q2 = true_return_quantiles(2, cfg, taus);
  for (std::size_t i = 0; i < taus.size(); ++i) EXPECT_NEAR(q0[i], 0.99 * 0.99 * q2[i], 1e-12);
}

TEST(Chain, AnalyticStandardDeviation) {
  ChainConfig cfg;
  EXPECT_NEAR(true_return_std(0, cfg), 0.9801 * std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(true_return_std(0, cfg), 2.1916, 1e-4);
  EXPECT_NEAR(true_return_std(2, cfg), std::sqrt(5.0), 1e-12);
}
