#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rqiqn/autodiff/mlp.hpp"

namespace rqiqn::env {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

struct Obstacle {
  Vec2 center;
  double radius = 1.0;
  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

/// Rankine vortex: solid-body rotation inside core_radius, 1/r decay outside.
/// Positive circulation turns counterclockwise.
struct Vortex {
  Vec2 center;
  double circulation = 1.0;
  double core_radius = 1.0;
  friend bool operator==(const Vortex&, const Vortex&) = default;
};

struct NavConfig {
  // workspace [0, width] x [0, height]
  double width = 25.0;
  double height = 25.0;

  int obstacle_count = 6;
  double obstacle_radius_min = 1.0;
  double obstacle_radius_max = 2.0;

  int vortex_count = 4;
  double circulation_min = 2.0;  // magnitude; sign is random
  double circulation_max = 4.0;
  double core_radius_min = 1.0;
  double core_radius_max = 2.0;

  double max_speed = 2.0;     // length / s
  double acceleration = 5.0;  // length / s^2 while accelerating or braking
  double turn_rate = 2.5;     // rad / s
  double dt = 0.1;            // s
  double vehicle_radius = 0.3;

  int lidar_rays = 16;
  double lidar_range = 10.0;
  double lidar_fov = std::numbers::pi;

  int episode_cap = 500;
  double goal_radius = 1.0;
  double min_start_goal_distance = 12.0;

  double w_progress = 1.0;
  double w_collision = 50.0;
  double w_step = 0.01;
  double w_goal = 20.0;

  void validate() const {
    if (!(width > 0.0 && height > 0.0)) throw std::invalid_argument("nav: workspace must have positive size");
    if (obstacle_count < 0 || vortex_count < 0) throw std::invalid_argument("nav: negative obstacle/vortex count");
    if (!(obstacle_radius_min > 0.0 && obstacle_radius_max >= obstacle_radius_min)) {
      throw std::invalid_argument("nav: obstacle radii must be positive and ordered");
    }
    if (!(core_radius_min > 0.0 && core_radius_max >= core_radius_min)) {
      throw std::invalid_argument("nav: vortex core radii must be positive and ordered");
    }
    if (!(dt > 0.0)) throw std::invalid_argument("nav: dt must be > 0");
    if (lidar_rays < 1) throw std::invalid_argument("nav: need at least one lidar ray");
    if (!(lidar_range > 0.0)) throw std::invalid_argument("nav: lidar range must be > 0");
    if (episode_cap < 1) throw std::invalid_argument("nav: episode cap must be >= 1");
    if (!(goal_radius > 0.0 && vehicle_radius > 0.0)) throw std::invalid_argument("nav: radii must be > 0");
  }
};

/// A concrete workspace: obstacles, vortices, start pose and goal.
struct Layout {
  double width = 25.0;
  double height = 25.0;
  std::vector<Obstacle> obstacles;
  std::vector<Vortex> vortices;
  Vec2 start;
  double start_heading = 0.0;
  Vec2 goal;
  std::uint64_t seed = 0;

  friend bool operator==(const Layout&, const Layout&) = default;
};

enum class NavAction : int { accelerate = 0, decelerate, turn_left, turn_right, hold };
inline constexpr int kNavActions = 5;

enum class Outcome { running, success, collision, timeout };

inline const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::running: return "running";
    case Outcome::success: return "success";
    case Outcome::collision: return "collision";
    case Outcome::timeout: return "timeout";
  }
  return "?";
}

struct Pose {
  Vec2 position;
  double heading = 0.0;
};

struct VehicleState {
  Pose pose;
  double speed = 0.0;
  int steps = 0;
  double energy = 0.0;       // summed squared control effort times dt
  double episode_return = 0.0;
  Outcome outcome = Outcome::running;
};

struct Observation {
  Vec2 goal_body;  // goal vector in the vehicle frame
  double speed = 0.0;
  double heading = 0.0;
  Vec2 position;
  std::vector<double> lidar;  // raw distances in [0, lidar_range]
  double nearest_obstacle = 0.0;

  /// Normalised network input.
  [[nodiscard]] std::vector<double> features(const NavConfig& cfg) const {
    std::vector<double> f;
    f.reserve(feature_size(cfg));
    const double diag = std::hypot(cfg.width, cfg.height);
    const double dist = norm(goal_body);
    f.push_back(dist / diag);
    f.push_back(dist > 0.0 ? goal_body.x / dist : 1.0);
    f.push_back(dist > 0.0 ? goal_body.y / dist : 0.0);
    f.push_back(speed / cfg.max_speed);
    f.push_back(std::cos(heading));
    f.push_back(std::sin(heading));
    f.push_back(position.x / cfg.width);
    f.push_back(position.y / cfg.height);
    for (double d : lidar) f.push_back(d / cfg.lidar_range);
    f.push_back(nearest_obstacle / cfg.lidar_range);
    return f;
  }

  static std::size_t feature_size(const NavConfig& cfg) { return 9 + static_cast<std::size_t>(cfg.lidar_rays); }
};

struct EpisodeOutcome {
  Outcome kind = Outcome::running;
  double episode_return = 0.0;
  double elapsed = 0.0;  // s
  double energy = 0.0;   // proxy: summed squared control effort times dt
};

/// Superposed Rankine vortex velocity at position.
inline Vec2 vortex_velocity(Vec2 position, const std::vector<Vortex>& vortices) {
  Vec2 v{};
  for (const Vortex& vx : vortices) {
    const Vec2 d = position - vx.center;
    const double r = norm(d);
    if (r == 0.0) continue;
    const double speed = r <= vx.core_radius
                             ? vx.circulation * r / (2.0 * std::numbers::pi * vx.core_radius * vx.core_radius)
                             : vx.circulation / (2.0 * std::numbers::pi * r);
    // unit tangent, counterclockwise
    v = v + Vec2{-speed * d.y / r, speed * d.x / r};
  }
  return v;
}

/// Smallest positive hit distance of a ray against one circle; 0 when the
/// origin is inside the circle, +inf on a miss.
inline double ray_circle(Vec2 origin, Vec2 dir, const Obstacle& o) {
  const Vec2 oc = origin - o.center;
  const double c = dot(oc, oc) - o.radius * o.radius;
  if (c <= 0.0) return 0.0;
  const double b = dot(oc, dir);
  const double disc = b * b - c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double t = -b - std::sqrt(disc);
  return t > 0.0 ? t : std::numeric_limits<double>::infinity();
}

/// Distance along the ray to the rectangle boundary; 0 when the origin is outside.
inline double ray_walls(Vec2 origin, Vec2 dir, double width, double height) {
  if (origin.x < 0.0 || origin.x > width || origin.y < 0.0 || origin.y > height) return 0.0;
  double t = std::numeric_limits<double>::infinity();
  if (dir.x > 0.0) t = std::min(t, (width - origin.x) / dir.x);
  if (dir.x < 0.0) t = std::min(t, -origin.x / dir.x);
  if (dir.y > 0.0) t = std::min(t, (height - origin.y) / dir.y);
  if (dir.y < 0.0) t = std::min(t, -origin.y / dir.y);
  return t;
}

/// Ray angles relative to heading, spread evenly over the frontal field of view.
inline std::vector<double> lidar_angles(const NavConfig& cfg) {
  std::vector<double> a(static_cast<std::size_t>(cfg.lidar_rays));
  if (cfg.lidar_rays == 1) return {0.0};
  for (int i = 0; i < cfg.lidar_rays; ++i) {
    a[static_cast<std::size_t>(i)] = -0.5 * cfg.lidar_fov + cfg.lidar_fov * i / (cfg.lidar_rays - 1);
  }
  return a;
}

inline std::vector<double> lidar_scan(const Pose& pose, const Layout& layout, const NavConfig& cfg) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(cfg.lidar_rays));
  for (double rel : lidar_angles(cfg)) {
    const double ang = pose.heading + rel;
    const Vec2 dir{std::cos(ang), std::sin(ang)};
    double t = ray_walls(pose.position, dir, layout.width, layout.height);
    for (const Obstacle& o : layout.obstacles) t = std::min(t, ray_circle(pose.position, dir, o));
    out.push_back(std::min(t, cfg.lidar_range));
  }
  return out;
}

inline Observation observe(const VehicleState& s, const Layout& layout, const NavConfig& cfg) {
  Observation obs;
  const Vec2 g = layout.goal - s.pose.position;
  const double c = std::cos(s.pose.heading), sn = std::sin(s.pose.heading);
  obs.goal_body = {c * g.x + sn * g.y, -sn * g.x + c * g.y};
  obs.speed = s.speed;
  obs.heading = s.pose.heading;
  obs.position = s.pose.position;
  obs.lidar = lidar_scan(s.pose, layout, cfg);
  obs.nearest_obstacle = *std::min_element(obs.lidar.begin(), obs.lidar.end());
  return obs;
}

inline bool in_collision(Vec2 p, const Layout& layout, const NavConfig& cfg) {
  const double r = cfg.vehicle_radius;
  if (p.x < r || p.y < r || p.x > layout.width - r || p.y > layout.height - r) return true;
  for (const Obstacle& o : layout.obstacles) {
    if (norm(p - o.center) < o.radius + r) return true;
  }
  return false;
}

struct NavStepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  Outcome outcome = Outcome::running;
};

/// Advances the vehicle one control interval. Deterministic in (state, action, layout).
inline NavStepResult nav_step(VehicleState& s, int action, const Layout& layout, const NavConfig& cfg) {
  if (action < 0 || action >= kNavActions) throw std::out_of_range("nav_step: invalid action " + std::to_string(action));
  if (s.outcome != Outcome::running) throw std::logic_error("nav_step: episode already finished");

  double u_lin = 0.0, u_ang = 0.0;
  switch (static_cast<NavAction>(action)) {
    case NavAction::accelerate: u_lin = 1.0; break;
    case NavAction::decelerate: u_lin = -1.0; break;
    case NavAction::turn_left: u_ang = 1.0; break;
    case NavAction::turn_right: u_ang = -1.0; break;
    case NavAction::hold: break;
  }
  const double prev_goal = norm(layout.goal - s.pose.position);
  s.speed = std::clamp(s.speed + u_lin * cfg.acceleration * cfg.dt, 0.0, cfg.max_speed);
  s.pose.heading = std::remainder(s.pose.heading + u_ang * cfg.turn_rate * cfg.dt, 2.0 * std::numbers::pi);
  const Vec2 own{s.speed * std::cos(s.pose.heading), s.speed * std::sin(s.pose.heading)};
  const Vec2 drift = vortex_velocity(s.pose.position, layout.vortices);
  s.pose.position = s.pose.position + cfg.dt * (own + drift);
  s.energy += (u_lin * u_lin + u_ang * u_ang) * cfg.dt;
  ++s.steps;

  const double goal_dist = norm(layout.goal - s.pose.position);
  double reward = cfg.w_progress * (prev_goal - goal_dist) - cfg.w_step;
  if (in_collision(s.pose.position, layout, cfg)) {
    s.outcome = Outcome::collision;
    reward -= cfg.w_collision;
  } else if (goal_dist <= cfg.goal_radius) {
    s.outcome = Outcome::success;
    reward += cfg.w_goal;
  } else if (s.steps >= cfg.episode_cap) {
    s.outcome = Outcome::timeout;
  }
  s.episode_return += reward;
  return {observe(s, layout, cfg), reward, s.outcome != Outcome::running, s.outcome};
}

/// Samples a layout with non-overlapping obstacles clear of start and goal.
inline Layout sample_layout(const NavConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * ux(rng); };
  Layout layout;
  layout.width = cfg.width;
  layout.height = cfg.height;
  layout.seed = seed;

  const double margin = 2.0;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 10000) throw std::runtime_error("sample_layout: cannot place start and goal");
    layout.start = {uniform(margin, cfg.width - margin), uniform(margin, cfg.height - margin)};
    layout.goal = {uniform(margin, cfg.width - margin), uniform(margin, cfg.height - margin)};
    if (norm(layout.goal - layout.start) >= cfg.min_start_goal_distance) break;
  }
  const Vec2 to_goal = layout.goal - layout.start;
  layout.start_heading = std::atan2(to_goal.y, to_goal.x) + uniform(-0.25 * std::numbers::pi, 0.25 * std::numbers::pi);

  const double clearance = 1.5;  // free space around start and goal
  const double gap = 1.0;        // minimum passage between obstacles
  for (int placed = 0, attempt = 0; placed < cfg.obstacle_count; ++attempt) {
    if (attempt > 100000) throw std::runtime_error("sample_layout: cannot place obstacles");
    Obstacle o;
    o.radius = uniform(cfg.obstacle_radius_min, cfg.obstacle_radius_max);
    o.center = {uniform(o.radius + gap, cfg.width - o.radius - gap), uniform(o.radius + gap, cfg.height - o.radius - gap)};
    if (norm(o.center - layout.start) < o.radius + cfg.vehicle_radius + clearance) continue;
    if (norm(o.center - layout.goal) < o.radius + cfg.goal_radius + clearance) continue;
    const bool overlaps = std::any_of(layout.obstacles.begin(), layout.obstacles.end(), [&](const Obstacle& other) {
      return norm(o.center - other.center) < o.radius + other.radius + gap;
    });
    if (overlaps) continue;
    layout.obstacles.push_back(o);
    ++placed;
  }
  for (int i = 0; i < cfg.vortex_count; ++i) {
    Vortex v;
    v.center = {uniform(0.0, cfg.width), uniform(0.0, cfg.height)};
    v.circulation = uniform(cfg.circulation_min, cfg.circulation_max) * (ux(rng) < 0.5 ? -1.0 : 1.0);
    v.core_radius = uniform(cfg.core_radius_min, cfg.core_radius_max);
    layout.vortices.push_back(v);
  }
  return layout;
}

/// Episode driver over a fixed layout.
class NavigationEnv {
 public:
  NavigationEnv(NavConfig cfg, Layout layout) : cfg_(std::move(cfg)), layout_(std::move(layout)) {
    cfg_.validate();
  }

  Observation reset() {
    state_ = VehicleState{};
    state_.pose = {layout_.start, layout_.start_heading};
    return observe(state_, layout_, cfg_);
  }

  NavStepResult step(int action) { return nav_step(state_, action, layout_, cfg_); }

  [[nodiscard]] EpisodeOutcome outcome() const {
    return {state_.outcome, state_.episode_return, state_.steps * cfg_.dt, state_.energy};
  }

  [[nodiscard]] const VehicleState& state() const noexcept { return state_; }
  [[nodiscard]] const Layout& layout() const noexcept { return layout_; }
  [[nodiscard]] const NavConfig& config() const noexcept { return cfg_; }

 private:
  NavConfig cfg_;
  Layout layout_;
  VehicleState state_;
};

}  // namespace rqiqn::env
