#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "rqiqn/agent/agent.hpp"
#include "rqiqn/env/navigation.hpp"
#include "rqiqn/experiment/config.hpp"

namespace rqiqn::experiment {

inline constexpr int kSnapshotVersion = 1;
inline constexpr const char* kSnapshotFormat = "rqiqn-snapshot";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- layouts ---------------------------------------------------------------

inline json layout_to_json(const env::Layout& l) {
  json obstacles = json::array();
  for (const auto& o : l.obstacles) obstacles.push_back({{"x", o.center.x}, {"y", o.center.y}, {"radius", o.radius}});
  json vortices = json::array();
  for (const auto& v : l.vortices) {
    vortices.push_back(
        {{"x", v.center.x}, {"y", v.center.y}, {"circulation", v.circulation}, {"core_radius", v.core_radius}});
  }
  return json{{"width", l.width},
              {"height", l.height},
              {"seed", l.seed},
              {"start", {{"x", l.start.x}, {"y", l.start.y}, {"heading", l.start_heading}}},
              {"goal", {{"x", l.goal.x}, {"y", l.goal.y}}},
              {"obstacles", obstacles},
              {"vortices", vortices}};
}

inline env::Layout layout_from_json(const json& j) {
  env::Layout l;
  try {
    l.width = j.at("width").get<double>();
    l.height = j.at("height").get<double>();
    l.seed = j.at("seed").get<std::uint64_t>();
    l.start = {j.at("start").at("x").get<double>(), j.at("start").at("y").get<double>()};
    l.start_heading = j.at("start").at("heading").get<double>();
    l.goal = {j.at("goal").at("x").get<double>(), j.at("goal").at("y").get<double>()};
    for (const auto& o : j.at("obstacles")) {
      l.obstacles.push_back({{o.at("x").get<double>(), o.at("y").get<double>()}, o.at("radius").get<double>()});
    }
    for (const auto& v : j.at("vortices")) {
      l.vortices.push_back({{v.at("x").get<double>(), v.at("y").get<double>()},
                            v.at("circulation").get<double>(),
                            v.at("core_radius").get<double>()});
    }
  } catch (const json::exception& e) {
    throw IoError(std::string("layout: ") + e.what());
  }
  return l;
}

inline void save_layouts(const std::string& path, const std::vector<env::Layout>& layouts) {
  json arr = json::array();
  for (const auto& l : layouts) arr.push_back(layout_to_json(l));
  std::ofstream out(path);
  if (!out) throw IoError("cannot write layout file '" + path + "'");
  out << json{{"layouts", arr}}.dump(2) << '\n';
}

inline std::vector<env::Layout> load_layouts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open layout file '" + path + "'");
  const json j = json::parse(in);
  std::vector<env::Layout> out;
  for (const auto& l : j.at("layouts")) out.push_back(layout_from_json(l));
  return out;
}

// ---- snapshots ---------------------------------------------------------------

namespace detail {

inline json tensor_to_json(const ad::Tensor& t) { return json{{"shape", t.shape()}, {"values", t.storage()}}; }

inline ad::Tensor tensor_from_json(const json& j) {
  return ad::Tensor(j.at("shape").get<ad::Shape>(), j.at("values").get<std::vector<double>>());
}

template <class Net>
std::vector<ad::ConstParamRef> const_params(const Net& net) {
  if constexpr (std::is_same_v<Net, ad::MlpParams>) {
    std::vector<ad::ConstParamRef> out;
    net.collect("q", out);
    return out;
  } else {
    return net.parameters();
  }
}

template <class Net>
std::vector<ad::ParamRef> mutable_params(Net& net) {
  if constexpr (std::is_same_v<Net, ad::MlpParams>) {
    std::vector<ad::ParamRef> out;
    net.collect("q", out);
    return out;
  } else {
    return net.parameters();
  }
}

template <class Net>
json params_to_json(const Net& net) {
  json out = json::object();
  for (const auto& p : const_params(net)) out[p.name] = tensor_to_json(*p.tensor);
  return out;
}

template <class Net>
void params_from_json(const json& j, Net& net, const std::string& which) {
  for (const auto& p : mutable_params(net)) {
    if (!j.contains(p.name)) throw IoError("snapshot: " + which + " is missing parameter '" + p.name + "'");
    ad::Tensor t = tensor_from_json(j.at(p.name));
    if (t.shape() != p.tensor->shape()) {
      throw IoError("snapshot: parameter '" + p.name + "' has shape " + ad::shape_string(t.shape()) + ", expected " +
                    ad::shape_string(p.tensor->shape()));
    }
    *p.tensor = std::move(t);
  }
}

template <class Net>
json snapshot_json(const agent::Snapshot<Net>& s, const Net& shape_ref) {
  json first = json::object(), second = json::object();
  const auto names = const_params(shape_ref);
  for (std::size_t i = 0; i < s.optimizer.first_moment.size() && i < names.size(); ++i) {
    first[names[i].name] = tensor_to_json(s.optimizer.first_moment[i]);
    second[names[i].name] = tensor_to_json(s.optimizer.second_moment[i]);
  }
  return json{{"step", s.step},
              {"epsilon", s.epsilon},
              {"online", params_to_json(s.online)},
              {"target", params_to_json(s.target)},
              {"optimizer", {{"step", s.optimizer.step}, {"first_moment", first}, {"second_moment", second}}}};
}

template <class Net>
void snapshot_from_json(const json& j, agent::Snapshot<Net>& s) {
  s.step = j.at("step").get<std::uint64_t>();
  s.epsilon = j.at("epsilon").get<double>();
  params_from_json(j.at("online"), s.online, "online");
  params_from_json(j.at("target"), s.target, "target");
  const json& opt = j.at("optimizer");
  s.optimizer.step = opt.at("step").get<std::uint64_t>();
  s.optimizer.first_moment.clear();
  s.optimizer.second_moment.clear();
  if (!opt.at("first_moment").empty()) {
    for (const auto& p : const_params(s.online)) {
      s.optimizer.first_moment.push_back(tensor_from_json(opt.at("first_moment").at(p.name)));
      s.optimizer.second_moment.push_back(tensor_from_json(opt.at("second_moment").at(p.name)));
    }
  }
}

}  // namespace detail

/// Writes the agent's networks, optimizer state and counters with the
/// configuration hash. Doubles are written with round-trip precision.
inline void save_snapshot(const std::string& path, const agent::Agent& a) {
  json body;
  if (const auto* q = dynamic_cast<const agent::QuantileAgent*>(&a)) {
    body = detail::snapshot_json(q->snapshot(), q->snapshot().online);
  } else if (const auto* d = dynamic_cast<const agent::DqnAgent*>(&a)) {
    body = detail::snapshot_json(d->snapshot(), d->snapshot().online);
  } else {
    throw IoError("save_snapshot: unsupported agent type");
  }
  body["format"] = kSnapshotFormat;
  body["version"] = kSnapshotVersion;
  body["agent_kind"] = agent::agent_kind_name(a.kind());
  body["config_hash"] = config_hash(a.config());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write snapshot '" + path + "'");
  out << body.dump() << '\n';
  if (!out) throw IoError("failed writing snapshot '" + path + "'");
}

/// Restores a snapshot into an agent built from the same configuration.
inline void load_snapshot(const std::string& path, agent::Agent& a) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open snapshot '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
  if (j.value("format", "") != kSnapshotFormat) throw IoError(path + ": not a snapshot file");
  if (j.value("version", 0) != kSnapshotVersion) {
    throw IoError(path + ": unsupported snapshot version " + std::to_string(j.value("version", 0)));
  }
  if (j.value("config_hash", "") != config_hash(a.config())) {
    throw IoError(path + ": snapshot was produced with a different agent configuration");
  }
  try {
    if (auto* q = dynamic_cast<agent::QuantileAgent*>(&a)) {
      detail::snapshot_from_json(j, q->mutable_snapshot());
    } else if (auto* d = dynamic_cast<agent::DqnAgent*>(&a)) {
      detail::snapshot_from_json(j, d->mutable_snapshot());
    } else {
      throw IoError("load_snapshot: unsupported agent type");
    }
  } catch (const json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace rqiqn::experiment
