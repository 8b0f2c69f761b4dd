#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "rqiqn/env/navigation.hpp"
#include "rqiqn/experiment/serialization.hpp"

using namespace rqiqn::env;

namespace {

constexpr double kPi = std::numbers::pi;

Layout open_layout(double size = 100.0) {
  Layout l;
  l.width = l.height = size;
  l.start = {size / 2, size / 2};
  l.goal = {size / 2 + 20.0, size / 2};
  return l;
}

NavConfig single_ray() {
  NavConfig c;
  c.lidar_rays = 1;
  return c;
}

}  // namespace

TEST(Vortex, Examples) {
  const std::vector<Vortex> v{Vortex{{0, 0}, 2.0 * kPi, 1.0}};
  const Vec2 inside = vortex_velocity({0.5, 0.0}, v);
  EXPECT_NEAR(inside.x, 0.0, 1e-15);
  EXPECT_NEAR(inside.y, 0.5, 1e-15);
  const Vec2 outside = vortex_velocity({0.0, 2.0}, v);
  EXPECT_NEAR(outside.x, -0.5, 1e-15);
  EXPECT_NEAR(outside.y, 0.0, 1e-15);
  EXPECT_EQ(vortex_velocity({0, 0}, v), (Vec2{0, 0}));
  const Vec2 cw = vortex_velocity({0.5, 0.0}, {Vortex{{0, 0}, -2.0 * kPi, 1.0}});
  EXPECT_NEAR(cw.y, -0.5, 1e-15);
}

TEST(Vortex, FieldIsDivergenceFreeWithTheRightCirculation) {
  const std::vector<Vortex> v{Vortex{{1, 2}, 3.0, 1.5}, Vortex{{-2, 0}, -2.0, 0.7}};
  const auto loop = [&](Vec2 c, double r, bool flux) {
    const int n = 20000;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * kPi * (i + 0.5) / n;
      const Vec2 u{std::cos(a), std::sin(a)};
      const Vec2 vel = vortex_velocity(c + r * u, v);
      total += (flux ? dot(vel, u) : dot(vel, Vec2{-u.y, u.x})) * r * 2.0 * kPi / n;
    }
    return total;
  };
  EXPECT_NEAR(loop({0.3, -0.4}, 2.5, true), 0.0, 1e-6);
  EXPECT_NEAR(loop({1, 2}, 0.5, true), 0.0, 1e-6);
  EXPECT_NEAR(loop({0, 0}, 20.0, false), 1.0, 1e-6);
  EXPECT_NEAR(loop({1, 2}, 2.0, false), 3.0, 1e-6);
}

TEST(Lidar, Examples) {
  const NavConfig cfg = single_ray();
  Layout l = open_layout();
  l.obstacles.push_back(Obstacle{{55, 50}, 2.0});
  EXPECT_NEAR(lidar_scan(Pose{{50, 50}, 0.0}, l, cfg)[0], 3.0, 1e-12);
  Layout walls = open_layout(9.0);
  EXPECT_NEAR(lidar_scan(Pose{{5, 5}, 0.0}, walls, cfg)[0], 4.0, 1e-12);
  EXPECT_EQ(lidar_scan(Pose{{50, 50}, kPi / 2}, l, cfg)[0], cfg.lidar_range);
  EXPECT_EQ(lidar_scan(Pose{{55, 50}, 0.0}, l, cfg)[0], 0.0);
}

TEST(Lidar, RaysSpanTheFieldOfViewSymmetrically) {
  NavConfig cfg;
  const auto a = lidar_angles(cfg);
  ASSERT_EQ(a.size(), 16U);
  EXPECT_NEAR(a.front(), -kPi / 2, 1e-15);
  EXPECT_NEAR(a.back(), kPi / 2, 1e-15);
}

TEST(Lidar, ReadingShrinksAsAnObstacleApproaches) {
  const NavConfig cfg = single_ray();
  double prev = cfg.lidar_range + 1.0;
  for (double cx = 70.0; cx >= 53.5; cx -= 0.5) {
    Layout l = open_layout();
    l.obstacles.push_back(Obstacle{{cx, 50.5}, 1.0});
    const double d = lidar_scan(Pose{{50, 50}, 0.0}, l, cfg)[0];
    EXPECT_LE(d, prev);
    prev = d;
  }
  EXPECT_LT(prev, cfg.lidar_range);
}

TEST(NavStep, HoldingAtRestCostsOnlyTheStepPenalty) {
  NavConfig cfg;
  const Layout l = open_layout();
  VehicleState s;
  s.pose = {l.start, 0.0};
  const NavStepResult r = nav_step(s, static_cast<int>(NavAction::hold), l, cfg);
  EXPECT_NEAR(r.reward, -cfg.w_step, 1e-15);
  EXPECT_FALSE(r.done);
  EXPECT_EQ(s.pose.position, l.start);
  EXPECT_EQ(s.energy, 0.0);
}

TEST(NavStep, AcceleratingTowardTheGoalEarnsProgress) {
  NavConfig cfg;
  const Layout l = open_layout();
  VehicleState s;
  s.pose = {l.start, 0.0};
  const NavStepResult r = nav_step(s, static_cast<int>(NavAction::accelerate), l, cfg);
  EXPECT_DOUBLE_EQ(s.speed, 0.5);
  EXPECT_NEAR(s.pose.position.x, 50.05, 1e-12);
  EXPECT_NEAR(r.reward, 0.05 - cfg.w_step, 1e-12);
  EXPECT_NEAR(s.energy, cfg.dt, 1e-15);
}

TEST(NavStep, ReachingTheGoalSucceeds) {
  NavConfig cfg;
  Layout l = open_layout();
  l.goal = {51.2, 50};
  VehicleState s;
  s.pose = {l.start, 0.0};
  s.speed = 2.0;
  const NavStepResult r = nav_step(s, static_cast<int>(NavAction::hold), l, cfg);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.outcome, Outcome::success);
  EXPECT_NEAR(r.reward, 0.2 - cfg.w_step + cfg.w_goal, 1e-12);
}

TEST(NavStep, HittingAnObstacleCollides) {
  NavConfig cfg;
  Layout l = open_layout();
  l.obstacles.push_back(Obstacle{{51.4, 50}, 1.0});
  VehicleState s;
  s.pose = {l.start, 0.0};
  s.speed = 2.0;
  const NavStepResult r = nav_step(s, static_cast<int>(NavAction::hold), l, cfg);
  EXPECT_EQ(r.outcome, Outcome::collision);
  EXPECT_NEAR(r.reward, 0.2 - cfg.w_step - cfg.w_collision, 1e-12);
  EXPECT_THROW(nav_step(s, 0, l, cfg), std::logic_error);
}

TEST(NavStep, TimesOutAtTheCap) {
  NavConfig cfg;
  cfg.episode_cap = 3;
  const Layout l = open_layout();
  VehicleState s;
  s.pose = {l.start, 0.0};
  nav_step(s, 4, l, cfg);
  nav_step(s, 4, l, cfg);
  EXPECT_EQ(nav_step(s, 4, l, cfg).outcome, Outcome::timeout);
}

TEST(NavStep, InvalidActionThrows) {
  NavConfig cfg;
  const Layout l = open_layout();
  VehicleState s;
  s.pose = {l.start, 0.0};
  EXPECT_THROW(nav_step(s, 5, l, cfg), std::out_of_range);
  EXPECT_THROW(nav_step(s, -1, l, cfg), std::out_of_range);
}

TEST(NavigationEnv, RolloutsAreDeterministic) {
  NavConfig cfg;
  const Layout layout = sample_layout(cfg, 42);
  const auto run = [&] {
    NavigationEnv env(cfg, layout);
    env.reset();
    std::vector<double> rewards;
    for (int t = 0; t < 200; ++t) {
      const auto r = env.step((t * 7) % kNavActions);
      rewards.push_back(r.reward);
      if (r.done) break;
    }
    return rewards;
  };
  EXPECT_EQ(run(), run());
}

TEST(Layout, SamplingIsSeededAndRespectsClearances) {
  NavConfig cfg;
  EXPECT_EQ(sample_layout(cfg, 7), sample_layout(cfg, 7));
  EXPECT_NE(sample_layout(cfg, 7), sample_layout(cfg, 8));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Layout l = sample_layout(cfg, seed);
    EXPECT_EQ(l.obstacles.size(), 6U);
    EXPECT_EQ(l.vortices.size(), 4U);
    EXPECT_GE(norm(l.goal - l.start), cfg.min_start_goal_distance);
    EXPECT_FALSE(in_collision(l.start, l, cfg));
  }
}

TEST(Layout, JsonRoundTrip) {
  const Layout l = sample_layout(NavConfig{}, 3);
  EXPECT_EQ(rqiqn::experiment::layout_from_json(rqiqn::experiment::layout_to_json(l)), l);
}

TEST(Observation, FeaturesAreNormalised) {
  NavConfig cfg;
  const Layout l = sample_layout(cfg, 5);
  NavigationEnv env(cfg, l);
  const auto f = env.reset().features(cfg);
  ASSERT_EQ(f.size(), Observation::feature_size(cfg));
  for (double x : f) {
    EXPECT_GE(x, -1.0);
    EXPECT_LE(x, 1.0);
  }
}
