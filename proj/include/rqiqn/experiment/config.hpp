#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "rqiqn/agent/agent.hpp"
#include "rqiqn/env/chain.hpp"
#include "rqiqn/env/navigation.hpp"

namespace rqiqn::experiment {

using nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { chain, nav };

struct ExperimentConfig {
  Task task = Task::chain;
  agent::AgentConfig agent;
  env::ChainConfig chain;
  env::NavConfig nav;
  std::uint64_t train_layout_seed = 1;
  std::uint64_t eval_layout_seed = 1000003;
  std::uint64_t total_steps = 0;
  std::size_t eval_episodes = 100;
  std::uint64_t eval_period = 10000;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";
  std::size_t probe_fractions = 1000;
  bool save_snapshots = true;

  void validate() const {
    agent.validate();
    if (task == Task::nav) nav.validate();
    if (seeds.empty()) throw ConfigError("experiment: seeds must be nonempty");
    if (total_steps > 0 && total_steps <= agent.train_start) {
      throw ConfigError("experiment: total_steps must exceed agent.train_start");
    }
    if (eval_period == 0) throw ConfigError("experiment: eval_period must be >= 1");
    if (probe_fractions == 0) throw ConfigError("experiment: probe_fractions must be >= 1");
  }
};

/// Reads keys from one JSON object and rejects any key it was not asked about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  template <class Enum>
  void get_enum(const std::string& key, Enum& out, std::initializer_list<std::pair<const char*, Enum>> names) {
    if (!j_.contains(key)) return;
    std::string s;
    get(key, s);
    for (const auto& [name, value] : names) {
      if (s == name) {
        out = value;
        return;
      }
    }
    throw ConfigError(path_ + "." + key + ": unknown value '" + s + "'");
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  ObjectReader child(const std::string& key) {
    seen_.insert(key);
    return ObjectReader(j_.at(key), path_ + "." + key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(path_ + "." + item.key() + ": unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read(ObjectReader r, loss::LossConfig& c) {
  r.get_enum("kind", c.kind, {{"check", loss::LossKind::check}, {"quantile_huber", loss::LossKind::quantile_huber}});
  r.get("kappa", c.kappa);
  r.finish();
}

inline void read(ObjectReader r, robust::RobustConfig& c) {
  r.get_enum("order", c.order, {{"two", robust::Order::two}, {"infinity", robust::Order::infinity}});
  r.get("epsilon0", c.epsilon0);
  r.get("sharpness", c.sharpness);
  r.get("midpoint", c.midpoint);
  r.get_enum("variant", c.variant, {{"raw", robust::Variant::raw}, {"bounded", robust::Variant::bounded}});
  r.finish();
}

inline void read(ObjectReader r, robust::DistortionConfig& c) {
  r.get_enum("kind", c.kind,
             {{"identity", robust::DistortionKind::identity},
              {"cvar", robust::DistortionKind::cvar},
              {"adaptive_cvar", robust::DistortionKind::adaptive_cvar}});
  r.get("eta", c.eta);
  r.get("safe_distance", c.safe_distance);
  r.get("eta_min", c.eta_min);
  r.finish();
}

inline void read(ObjectReader r, agent::AgentConfig& c) {
  r.get_enum("kind", c.kind,
             {{"dqn", agent::AgentKind::dqn}, {"iqn", agent::AgentKind::iqn}, {"rqiqn", agent::AgentKind::rqiqn}});
  r.get("num_fractions", c.num_fractions);
  r.get("num_target_fractions", c.num_target_fractions);
  r.get("num_selection_fractions", c.num_selection_fractions);
  r.get("gamma", c.gamma);
  if (r.has("loss")) read(r.child("loss"), c.loss);
  if (r.has("robust")) read(r.child("robust"), c.robust);
  if (r.has("distortion")) read(r.child("distortion"), c.distortion);
  if (r.has("network")) {
    ObjectReader n = r.child("network");
    n.get("hidden", c.network.hidden);
    n.get("cosine_features", c.network.cosine_features);
    n.finish();
  }
  if (r.has("optimizer")) {
    ObjectReader o = r.child("optimizer");
    o.get("learning_rate", c.optimizer.learning_rate);
    o.get("beta1", c.optimizer.beta1);
    o.get("beta2", c.optimizer.beta2);
    o.get("epsilon", c.optimizer.epsilon);
    o.finish();
  }
  r.get("grad_clip_norm", c.grad_clip_norm);
  r.get("batch_size", c.batch_size);
  r.get("replay_capacity", c.replay_capacity);
  r.get("target_sync_period", c.target_sync_period);
  r.get("update_period", c.update_period);
  r.get("train_start", c.train_start);
  if (r.has("exploration")) {
    ObjectReader e = r.child("exploration");
    e.get("start", c.exploration.start);
    e.get("end", c.exploration.end);
    e.get("horizon", c.exploration.horizon);
    e.finish();
  }
  r.finish();
}

inline void read(ObjectReader r, env::ChainConfig& c) {
  r.get("mixture_mean", c.mixture_mean);
  r.get("mixture_std", c.mixture_std);
  r.finish();
}

inline void read(ObjectReader r, env::NavConfig& c) {
  r.get("width", c.width);
  r.get("height", c.height);
  r.get("obstacle_count", c.obstacle_count);
  r.get("obstacle_radius_min", c.obstacle_radius_min);
  r.get("obstacle_radius_max", c.obstacle_radius_max);
  r.get("vortex_count", c.vortex_count);
  r.get("circulation_min", c.circulation_min);
  r.get("circulation_max", c.circulation_max);
  r.get("core_radius_min", c.core_radius_min);
  r.get("core_radius_max", c.core_radius_max);
  r.get("max_speed", c.max_speed);
  r.get("acceleration", c.acceleration);
  r.get("turn_rate", c.turn_rate);
  r.get("dt", c.dt);
  r.get("vehicle_radius", c.vehicle_radius);
  r.get("lidar_rays", c.lidar_rays);
  r.get("lidar_range", c.lidar_range);
  r.get("lidar_fov", c.lidar_fov);
  r.get("episode_cap", c.episode_cap);
  r.get("goal_radius", c.goal_radius);
  r.get("min_start_goal_distance", c.min_start_goal_distance);
  r.get("w_progress", c.w_progress);
  r.get("w_collision", c.w_collision);
  r.get("w_step", c.w_step);
  r.get("w_goal", c.w_goal);
  r.finish();
}

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "config");
  r.get_enum("task", c.task, {{"chain", Task::chain}, {"nav", Task::nav}});
  if (r.has("agent")) read(r.child("agent"), c.agent);
  if (r.has("chain")) read(r.child("chain"), c.chain);
  if (r.has("nav")) read(r.child("nav"), c.nav);
  r.get("train_layout_seed", c.train_layout_seed);
  r.get("eval_layout_seed", c.eval_layout_seed);
  r.get("total_steps", c.total_steps);
  r.get("eval_episodes", c.eval_episodes);
  r.get("eval_period", c.eval_period);
  r.get("seeds", c.seeds);
  r.get("output_dir", c.output_dir);
  r.get("probe_fractions", c.probe_fractions);
  r.get("save_snapshots", c.save_snapshots);
  r.finish();
  c.chain.gamma = c.agent.gamma;
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

inline json to_json(const agent::AgentConfig& c) {
  const auto loss_kind = c.loss.kind == loss::LossKind::check ? "check" : "quantile_huber";
  const char* dist = c.distortion.kind == robust::DistortionKind::identity ? "identity"
                     : c.distortion.kind == robust::DistortionKind::cvar   ? "cvar"
                                                                           : "adaptive_cvar";
  return json{
      {"kind", agent::agent_kind_name(c.kind)},
      {"num_fractions", c.num_fractions},
      {"num_target_fractions", c.num_target_fractions},
      {"num_selection_fractions", c.num_selection_fractions},
      {"gamma", c.gamma},
      {"loss", {{"kind", loss_kind}, {"kappa", c.loss.kappa}}},
      {"robust",
       {{"order", c.robust.order == robust::Order::two ? "two" : "infinity"},
        {"epsilon0", c.robust.epsilon0},
        {"sharpness", c.robust.sharpness},
        {"midpoint", c.robust.midpoint},
        {"variant", c.robust.variant == robust::Variant::raw ? "raw" : "bounded"}}},
      {"distortion",
       {{"kind", dist},
        {"eta", c.distortion.eta},
        {"safe_distance", c.distortion.safe_distance},
        {"eta_min", c.distortion.eta_min}}},
      {"network", {{"hidden", c.network.hidden}, {"cosine_features", c.network.cosine_features}}},
      {"optimizer",
       {{"learning_rate", c.optimizer.learning_rate},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"epsilon", c.optimizer.epsilon}}},
      {"grad_clip_norm", c.grad_clip_norm},
      {"batch_size", c.batch_size},
      {"replay_capacity", c.replay_capacity},
      {"target_sync_period", c.target_sync_period},
      {"update_period", c.update_period},
      {"train_start", c.train_start},
      {"exploration",
       {{"start", c.exploration.start}, {"end", c.exploration.end}, {"horizon", c.exploration.horizon}}},
  };
}

/// FNV-1a over the canonical JSON dump of the agent configuration (seed excluded).
inline std::string config_hash(const agent::AgentConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace rqiqn::experiment
