#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rqiqn/agent/agent.hpp"
#include "rqiqn/env/chain.hpp"
#include "rqiqn/env/navigation.hpp"
#include "rqiqn/experiment/config.hpp"
#include "rqiqn/experiment/metrics.hpp"
#include "rqiqn/experiment/serialization.hpp"
#include "rqiqn/verify/degeneration.hpp"

namespace rqiqn::experiment {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Training layouts use even seeds and evaluation layouts odd ones, so the
/// two pools never share a layout.
inline std::uint64_t training_layout_seed(std::uint64_t base, std::uint64_t run_seed, std::uint64_t episode) {
  return splitmix64(splitmix64(base ^ splitmix64(run_seed)) + episode) << 1;
}

inline std::uint64_t evaluation_layout_seed(std::uint64_t base, std::uint64_t index) {
  return (splitmix64(base + index) << 1) | 1ULL;
}

struct EvalSummary {
  std::size_t episodes = 0;
  double return_mean = kMissing;
  double return_std = kMissing;
  double success_rate = kMissing;
  double collision_rate = kMissing;
  double timeout_rate = kMissing;
  double time_succ = kMissing;
  double energy_succ = kMissing;
};

namespace detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  if (v.empty()) {
    mean = sd = kMissing;
    return;
  }
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  mean = m;
  sd = std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace detail

/// Greedy rollouts on held-out layouts.
inline EvalSummary evaluate_nav(const agent::Agent& a, const env::NavConfig& cfg, std::uint64_t eval_base,
                                std::size_t episodes, Rng& rng) {
  EvalSummary s;
  s.episodes = episodes;
  if (episodes == 0) return s;
  std::vector<double> returns, times, energies;
  std::size_t succ = 0, coll = 0, tout = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    env::NavigationEnv nav(cfg, env::sample_layout(cfg, evaluation_layout_seed(eval_base, e)));
    env::Observation obs = nav.reset();
    for (;;) {
      const auto f = obs.features(cfg);
      const auto r = nav.step(a.act_greedy(f, obs.nearest_obstacle, rng));
      if (r.done) break;
      obs = r.observation;
    }
    const env::EpisodeOutcome out = nav.outcome();
    returns.push_back(out.episode_return);
    switch (out.kind) {
      case env::Outcome::success:
        ++succ;
        times.push_back(out.elapsed);
        energies.push_back(out.energy);
        break;
      case env::Outcome::collision: ++coll; break;
      case env::Outcome::timeout: ++tout; break;
      case env::Outcome::running: break;
    }
  }
  const double n = static_cast<double>(episodes);
  detail::mean_std(returns, s.return_mean, s.return_std);
  s.success_rate = static_cast<double>(succ) / n;
  s.collision_rate = static_cast<double>(coll) / n;
  s.timeout_rate = static_cast<double>(tout) / n;
  double unused = 0.0;
  detail::mean_std(times, s.time_succ, unused);
  detail::mean_std(energies, s.energy_succ, unused);
  return s;
}

/// Greedy rollouts of the chain; every episode ends in the terminal state.
inline EvalSummary evaluate_chain(const agent::Agent& a, const env::ChainConfig& cfg, std::size_t episodes, Rng& rng) {
  EvalSummary s;
  s.episodes = episodes;
  if (episodes == 0) return s;
  std::vector<double> returns;
  for (std::size_t e = 0; e < episodes; ++e) {
    int state = 0;
    double ret = 0.0, discount = 1.0;
    for (;;) {
      (void)a.act_greedy(env::chain_observation(state), std::nullopt, rng);
      const env::ChainStep st = env::chain_step(state, cfg, rng);
      ret += discount * st.reward;
      discount *= cfg.gamma;
      state = st.next_state;
      if (st.done) break;
    }
    returns.push_back(ret);
  }
  detail::mean_std(returns, s.return_mean, s.return_std);
  s.success_rate = 1.0;
  s.collision_rate = 0.0;
  s.timeout_rate = 0.0;
  return s;
}

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> records;
  std::optional<verify::SpreadReport> spread;
  EvalSummary final_eval;
  bool aborted = false;
  std::string error;
  std::unique_ptr<agent::Agent> agent;
};

struct RunOptions {
  bool write_files = true;
  std::function<void(const MetricsRecord&)> on_record;
};

inline std::size_t observation_size(const ExperimentConfig& cfg) {
  return cfg.task == Task::chain ? static_cast<std::size_t>(env::ChainConfig::kStates)
                                 : env::Observation::feature_size(cfg.nav);
}

inline std::size_t action_count(const ExperimentConfig& cfg) {
  return cfg.task == Task::chain ? 1 : static_cast<std::size_t>(env::kNavActions);
}

inline std::unique_ptr<agent::Agent> build_agent(const ExperimentConfig& cfg, std::uint64_t seed) {
  agent::AgentConfig ac = cfg.agent;
  ac.seed = seed;
  return agent::make_agent(ac, observation_size(cfg), action_count(cfg));
}

inline std::string run_file(const ExperimentConfig& cfg, const std::string& stem, std::uint64_t seed,
                            const std::string& ext) {
  return (std::filesystem::path(cfg.output_dir) /
          (stem + "_" + agent::agent_kind_name(cfg.agent.kind) + "_seed" + std::to_string(seed) + ext))
      .string();
}

inline EvalSummary evaluate_agent(const agent::Agent& a, const ExperimentConfig& cfg, std::uint64_t seed,
                                  std::uint64_t step) {
  Rng rng(splitmix64(seed ^ splitmix64(step + 0x5eedULL)));
  return cfg.task == Task::chain ? evaluate_chain(a, cfg.chain, cfg.eval_episodes, rng)
                                 : evaluate_nav(a, cfg.nav, cfg.eval_layout_seed, cfg.eval_episodes, rng);
}

inline std::vector<double> probe_stds(const agent::Agent& a, const ExperimentConfig& cfg) {
  if (cfg.task != Task::chain) return {};
  const auto taus = verify::probe_grid(cfg.probe_fractions);
  const auto report = verify::degeneration_metrics(a, cfg.chain, taus);
  std::vector<double> out;
  for (const auto& s : report.states) out.push_back(s.learned_std);
  return out;
}

/// Trains one seed, evaluating every eval_period steps and at the end.
inline SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& opts = {}) {
  SeedResult res;
  res.seed = seed;
  res.agent = build_agent(cfg, seed);
  agent::Agent& a = *res.agent;
  const auto t_start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  std::optional<MetricsWriter> writer;
  if (opts.write_files) {
    std::filesystem::create_directories(cfg.output_dir);
    const std::string path = run_file(cfg, "metrics", seed, ".jsonl");
    std::filesystem::remove(path);
    writer.emplace(path);
  }
  const auto emit = [&](MetricsRecord r) {
    r.seed = seed;
    r.wall_clock = elapsed();
    if (writer) writer->write(r);
    if (opts.on_record) opts.on_record(r);
    res.records.push_back(std::move(r));
  };

  // Environment state for both tasks.
  Rng env_rng(splitmix64(seed ^ 0xc4a1ULL));
  int chain_state = 0;
  std::uint64_t nav_episode = 0;
  std::optional<env::NavigationEnv> nav;
  std::vector<double> obs;
  std::optional<double> context;
  const auto reset = [&] {
    if (cfg.task == Task::chain) {
      chain_state = 0;
      obs = env::chain_observation(chain_state);
      context.reset();
    } else {
      nav.emplace(cfg.nav, env::sample_layout(cfg.nav, training_layout_seed(cfg.train_layout_seed, seed, nav_episode++)));
      const env::Observation o = nav->reset();
      obs = o.features(cfg.nav);
      context = o.nearest_obstacle;
    }
  };
  if (cfg.total_steps > 0) reset();

  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  double epsilon = 0.0;
  for (std::uint64_t t = 1; t <= cfg.total_steps; ++t) {
    try {
      const int action = a.act(obs, context);
      agent::Transition tr;
      tr.state = obs;
      tr.action = action;
      if (cfg.task == Task::chain) {
        const env::ChainStep st = env::chain_step(chain_state, cfg.chain, env_rng);
        chain_state = st.next_state;
        tr.reward = st.reward;
        tr.done = st.done;
        tr.next_state = env::chain_observation(chain_state);
      } else {
        const env::NavStepResult st = nav->step(action);
        tr.reward = st.reward;
        tr.done = st.done;
        tr.next_state = st.observation.features(cfg.nav);
        tr.next_context = st.observation.nearest_obstacle;
      }
      const bool done = tr.done;
      obs = tr.next_state;
      context = tr.next_context;
      a.observe(std::move(tr));
      const agent::TrainStats stats = a.train_step();
      epsilon = stats.epsilon;
      if (stats.updated) {
        loss_sum += stats.loss;
        ++loss_count;
      }
      if (done) reset();
    } catch (const std::exception& e) {
      MetricsRecord r;
      r.step = t;
      r.epsilon = epsilon;
      r.error = e.what();
      res.aborted = true;
      res.error = e.what();
      emit(std::move(r));
      return res;
    }

    if (t % cfg.eval_period == 0 || t == cfg.total_steps) {
      const EvalSummary ev = evaluate_agent(a, cfg, seed, t);
      MetricsRecord r;
      r.step = t;
      r.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : kMissing;
      r.epsilon = epsilon;
      r.eval_return_mean = ev.return_mean;
      r.eval_return_std = ev.return_std;
      r.success_rate = ev.success_rate;
      r.collision_rate = ev.collision_rate;
      r.timeout_rate = ev.timeout_rate;
      r.time_succ = ev.time_succ;
      r.energy_succ = ev.energy_succ;
      r.probe_state_std = probe_stds(a, cfg);
      emit(std::move(r));
      loss_sum = 0.0;
      loss_count = 0;
      if (t == cfg.total_steps) res.final_eval = ev;
    }
  }

  if (cfg.task == Task::chain && cfg.total_steps > 0) {
    res.spread = verify::degeneration_metrics(a, cfg.chain, verify::probe_grid(cfg.probe_fractions));
  }
  if (opts.write_files && cfg.total_steps > 0) {
    if (cfg.save_snapshots) save_snapshot(run_file(cfg, "snapshot", seed, ".json"), a);
    if (res.spread) {
      const std::string path = run_file(cfg, "quantiles", seed, ".csv");
      std::ofstream out(path);
      if (!out) throw IoError("cannot write '" + path + "'");
      out << "tau";
      for (const auto& s : res.spread->states) out << ",learned_state" << s.state << ",true_state" << s.state;
      out << '\n' << std::setprecision(17);
      for (std::size_t i = 0; i < res.spread->taus.size(); ++i) {
        out << res.spread->taus[i];
        for (const auto& s : res.spread->states) out << ',' << s.learned_quantiles[i] << ',' << s.true_quantiles[i];
        out << '\n';
      }
    }
  }
  return res;
}

inline std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  std::vector<SeedResult> out;
  for (std::uint64_t seed : cfg.seeds) out.push_back(run_seed(cfg, seed, opts));
  return out;
}

}  // namespace rqiqn::experiment
