#pragma once

// Invariant and oracle checks shared by the `verify` command and the
// acceptance binary. Each check returns a CriterionResult instead of
// asserting, so callers decide how to report.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rqiqn/agent/agent.hpp"
#include "rqiqn/agent/quantile_network.hpp"
#include "rqiqn/agent/td.hpp"
#include "rqiqn/autodiff/mlp.hpp"
#include "rqiqn/experiment/runner.hpp"
#include "rqiqn/robust/correction.hpp"
#include "rqiqn/verify/degeneration.hpp"
#include "rqiqn/verify/oracles.hpp"

namespace rqiqn::verify {

struct CriterionResult {
  CriterionResult() = default;
  CriterionResult(int criterion, std::string label) : id(criterion), name(std::move(label)) {}

  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

namespace detail {

class Stopwatch {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace detail

// ---- 1: correction properties ------------------------------------------------

/// Dyadic grid i / 2^14 (i = 1 .. 2^14 - 1); 1 - tau is exact on it.
inline std::vector<double> dyadic_grid() {
  constexpr std::size_t m = 1U << 14U;
  std::vector<double> t(m - 1);
  for (std::size_t i = 1; i < m; ++i) t[i - 1] = static_cast<double>(i) / static_cast<double>(m);
  return t;
}

inline CriterionResult check_correction_properties() {
  detail::Stopwatch sw;
  CriterionResult r(1, "correction property suite");
  const auto grid = dyadic_grid();
  // Midpoint rule over (0,1): (2i+1) / 2^15, also dyadic.
  constexpr std::size_t mq = 1U << 14U;
  std::vector<double> quad(mq);
  for (std::size_t i = 0; i < mq; ++i) quad[i] = (2.0 * static_cast<double>(i) + 1.0) / (2.0 * mq);

  using robust::Order;
  struct Form {
    const char* name;
    std::function<double(double, double)> fn;
  };
  const std::vector<Form> forms{
      {"raw p=2", [](double t, double e) { return robust::delta_raw(t, e, Order::two); }},
      {"raw p=inf", [](double t, double e) { return robust::delta_raw(t, e, Order::infinity); }},
      {"bounded p=2", [](double t, double e) { return robust::delta_bounded_2(t, e); }},
  };
  double worst_anti = 0.0, worst_mean = 0.0, worst_lin = 0.0;
  std::vector<std::string> failures;
  for (const double eps : {0.1, 1.0, 10.0}) {
    for (const Form& f : forms) {
      for (double t : grid) worst_anti = std::max(worst_anti, std::abs(f.fn(1.0 - t, eps) + f.fn(t, eps)));
      if (f.fn(0.5, eps) != 0.0) failures.push_back(std::string(f.name) + ": value at 0.5 is not exactly 0");
      double mean = 0.0;
      for (double t : quad) mean += f.fn(t, eps);
      worst_mean = std::max(worst_mean, std::abs(mean / static_cast<double>(mq)));
      for (double t : grid) {
        const double base = f.fn(t, 1.0);
        worst_lin = std::max(worst_lin, std::abs(f.fn(t, eps) - eps * base) / std::max(1.0, std::abs(eps * base)));
      }
    }
    double prev = -std::numeric_limits<double>::infinity();
    for (double t : grid) {
      const double d = robust::delta_raw(t, eps, Order::infinity);
      if (d < prev) failures.push_back("p=inf decreases at tau=" + detail::fmt(t));
      if (std::abs(d) > eps) failures.push_back("p=inf exceeds eps at tau=" + detail::fmt(t));
      prev = d;
    }
    prev = std::numeric_limits<double>::infinity();
    for (double t : grid) {
      const double d = robust::delta_bounded_2(t, eps);
      if (d > prev) failures.push_back("bounded p=2 increases at tau=" + detail::fmt(t));
      if (std::abs(d) > eps / 2.0) failures.push_back("bounded p=2 exceeds eps/2 at tau=" + detail::fmt(t));
      prev = d;
    }
  }
  if (worst_anti > 1e-12) failures.push_back("antisymmetry deviation " + detail::fmt(worst_anti));
  if (worst_mean > 1e-8) failures.push_back("quadrature mean " + detail::fmt(worst_mean));
  if (worst_lin > 1e-12) failures.push_back("linearity deviation " + detail::fmt(worst_lin));
  r.seconds = sw.seconds();
  if (r.seconds >= 1.0) failures.push_back("runtime " + detail::fmt(r.seconds) + " s >= 1 s");
  r.passed = failures.empty();
  r.detail = r.passed ? "antisymmetry " + detail::fmt(worst_anti) + ", mean " + detail::fmt(worst_mean) +
                            ", linearity " + detail::fmt(worst_lin) + ", " + std::to_string(grid.size()) + " points"
                      : failures.front() + (failures.size() > 1 ? " (+" + std::to_string(failures.size() - 1) + ")" : "");
  return r;
}

// ---- 2: brute-force DRO minimiser vs closed form -------------------------------

struct DroInstance {
  EmpiricalTargetLaw law;
  double tau;
  double epsilon;
};

inline DroInstance random_dro_instance(Rng& rng) {
  std::uniform_int_distribution<int> count(1, 10);
  std::uniform_real_distribution<double> y(-5.0, 5.0), tau(0.1, 0.9), eps(0.0, 2.0);
  DroInstance inst;
  const int n = count(rng);
  for (int j = 0; j < n; ++j) inst.law.samples.push_back(y(rng));
  inst.tau = tau(rng);
  inst.epsilon = eps(rng);
  return inst;
}

inline CriterionResult check_dro_equivalence(std::uint64_t seed = 2024, std::size_t instances = 100) {
  detail::Stopwatch sw;
  CriterionResult r(2, "p=inf DRO oracle equivalence");
  Rng rng(seed);
  const DroOracleConfig cfg;
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const DroInstance inst = random_dro_instance(rng);
    const double brute = dro_robust_minimizer_bruteforce(inst.law, inst.tau, inst.epsilon, cfg);
    const double closed = empirical_quantile_slot(inst.law, inst.tau) + inst.epsilon * (2.0 * inst.tau - 1.0);
    worst = std::max(worst, std::abs(brute - closed));
  }
  r.seconds = sw.seconds();
  // One grid step, allowing for rounding in the grid coordinates.
  const double limit = cfg.resolution * (1.0 + 1e-9);
  r.passed = worst <= limit && r.seconds < 30.0;
  r.detail = "max |brute - closed| = " + detail::fmt(worst) + " over " + std::to_string(instances) +
             " instances, " + detail::fmt(r.seconds) + " s";
  return r;
}

// ---- 3: coverage of the empirical slot ------------------------------------------

inline CriterionResult check_coverage(std::uint64_t seed = 7, std::size_t laws = 1000) {
  detail::Stopwatch sw;
  CriterionResult r(3, "empirical slot coverage");
  Rng rng(seed);
  std::uniform_int_distribution<int> count(1, 50), coin(0, 1), small(-3, 3);
  std::uniform_real_distribution<double> y(-10.0, 10.0), u(0.0, 1.0);
  std::size_t violations = 0, not_minimal = 0;
  for (std::size_t i = 0; i < laws; ++i) {
    EmpiricalTargetLaw law;
    const int n = count(rng);
    const bool ties = coin(rng) == 1;
    for (int j = 0; j < n; ++j) law.samples.push_back(ties ? static_cast<double>(small(rng)) : y(rng));
    double tau = u(rng);
    if (i % 4 == 0) tau = static_cast<double>(1 + static_cast<int>(u(rng) * (n - 1))) / n;  // exact k/n levels
    if (!(tau > 0.0 && tau < 1.0)) tau = 0.5;
    const double q = empirical_quantile_slot(law, tau);
    if (!coverage(law, q).holds(tau)) ++violations;
    // Independent minimality check against every atom.
    const double lq = empirical_check_loss(law, q, tau);
    for (double c : law.samples) {
      if (empirical_check_loss(law, c, tau) < lq - 1e-12 * (1.0 + std::abs(lq))) {
        ++not_minimal;
        break;
      }
    }
  }
  r.seconds = sw.seconds();
  r.passed = violations == 0 && not_minimal == 0 && r.seconds < 5.0;
  r.detail = std::to_string(violations) + " coverage violations, " + std::to_string(not_minimal) +
             " non-minimal slots over " + std::to_string(laws) + " laws, " + detail::fmt(r.seconds) + " s";
  return r;
}

// ---- 4: exact reduction at zero radius --------------------------------------------

inline experiment::ExperimentConfig reduction_config(agent::AgentKind kind, std::uint64_t steps = 4000) {
  experiment::ExperimentConfig c;
  c.task = experiment::Task::chain;
  c.agent.kind = kind;
  c.agent.network.hidden = 16;
  c.agent.batch_size = 16;
  c.agent.train_start = 500;
  c.agent.target_sync_period = 250;
  c.agent.update_period = 2;
  c.agent.robust.epsilon0 = 0.0;
  c.agent.seed = 11;
  c.total_steps = steps;
  c.eval_period = 1000;
  c.eval_episodes = 20;
  c.probe_fractions = 200;
  c.seeds = {11};
  c.save_snapshots = false;
  return c;
}

inline CriterionResult check_exact_reduction(std::uint64_t steps = 4000) {
  detail::Stopwatch sw;
  CriterionResult r(4, "zero-radius reduction to the plain quantile agent");
  std::vector<std::string> failures;

  // Single-batch loss and gradient on identical agents and batches.
  {
    auto ci = reduction_config(agent::AgentKind::iqn).agent;
    auto cr = reduction_config(agent::AgentKind::rqiqn).agent;
    agent::QuantileAgent ai(ci, env::ChainConfig::kStates, 1), ar(cr, env::ChainConfig::kStates, 1);
    Rng env_rng(5);
    std::vector<agent::Transition> data;
    int s = 0;
    for (int t = 0; t < 64; ++t) {
      const env::ChainStep st = env::chain_step(s, env::ChainConfig{}, env_rng);
      data.push_back({env::chain_observation(s), 0, st.reward, env::chain_observation(st.next_state), st.done, {}});
      s = st.done ? 0 : st.next_state;
    }
    std::vector<const agent::Transition*> batch;
    for (const auto& d : data) batch.push_back(&d);
    Rng ri(99), rr(99);
    ad::Tape ti, tr;
    const auto bi = agent::bind(ti, ai.snapshot().online, true);
    const auto br = agent::bind(tr, ar.snapshot().online, true);
    const ad::Var li = ai.batch_loss(ti, bi, batch, 0.0, ri);
    const ad::Var lr = ar.batch_loss(tr, br, batch, ar.current_epsilon(1), rr);
    if (ti.value(li)[0] != tr.value(lr)[0]) failures.push_back("batch loss differs");
    ti.backward(li);
    tr.backward(lr);
    if (agent::gradients(ti, bi) != agent::gradients(tr, br)) failures.push_back("gradients differ");
  }

  // Full training streams.
  experiment::RunOptions quiet;
  quiet.write_files = false;
  const auto iqn = experiment::run_seed(reduction_config(agent::AgentKind::iqn, steps), 11, quiet);
  const auto rq = experiment::run_seed(reduction_config(agent::AgentKind::rqiqn, steps), 11, quiet);
  if (iqn.records.size() != rq.records.size()) failures.push_back("metrics stream lengths differ");
  for (std::size_t i = 0; i < std::min(iqn.records.size(), rq.records.size()); ++i) {
    if (!experiment::same_record(iqn.records[i], rq.records[i], true)) {
      failures.push_back("metrics differ at record " + std::to_string(i));
      break;
    }
  }
  const auto* qi = dynamic_cast<const agent::QuantileAgent*>(iqn.agent.get());
  const auto* qr = dynamic_cast<const agent::QuantileAgent*>(rq.agent.get());
  if (!(qi && qr && qi->snapshot().online == qr->snapshot().online)) failures.push_back("final weights differ");
  r.seconds = sw.seconds();
  r.passed = failures.empty();
  r.detail = r.passed ? "loss, gradients, " + std::to_string(iqn.records.size()) + " metrics records and weights identical"
                      : failures.front();
  return r;
}

// ---- 5: autodiff against central differences ------------------------------------

/// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||) of
/// the pairwise quantile-Huber loss of a random small network.
inline double network_gradient_error(Rng& rng) {
  std::uniform_int_distribution<int> width(2, 6), acts(1, 3), feats(2, 6), batch(1, 3), fr(1, 4);
  std::uniform_real_distribution<double> u(-1.0, 1.0), t(0.02, 0.98);
  const std::size_t obs = static_cast<std::size_t>(width(rng));
  const std::size_t actions = static_cast<std::size_t>(acts(rng));
  agent::NetworkConfig nc{static_cast<std::size_t>(width(rng)), static_cast<std::size_t>(feats(rng))};
  agent::QuantileNetwork net(obs, actions, nc, rng);
  const std::size_t b = static_cast<std::size_t>(batch(rng)), n = static_cast<std::size_t>(fr(rng)), np = 3;

  ad::Tensor states = ad::Tensor::matrix(b, obs);
  for (double& v : states.values()) v = u(rng);
  std::vector<double> taus(b * n);
  for (double& v : taus) v = t(rng);
  std::vector<std::size_t> cols(b * n);
  for (std::size_t i = 0; i < b * n; ++i) cols[i] = static_cast<std::size_t>(rng() % actions);
  agent::TargetBatch tb;
  tb.target_count = np;
  for (std::size_t i = 0; i < b; ++i) {
    tb.rewards.push_back(u(rng));
    tb.done.push_back(0);
  }
  for (std::size_t i = 0; i < b * np; ++i) {
    tb.next_quantiles.push_back(2.0 * u(rng));
    tb.target_fractions.push_back(t(rng));
  }
  const loss::LossConfig lc{loss::LossKind::quantile_huber, 1.0};

  const auto value = [&](ad::Tape& tape, const agent::BoundQuantileNetwork& bound) {
    const ad::Var z = agent::quantile_values(tape, bound, states, taus, n);
    return agent::pairwise_quantile_loss(ad::gather_columns(z, cols), tb, taus, {}, 0.9, lc);
  };
  ad::Tape tape;
  const auto bound = agent::bind(tape, net, true);
  const ad::Var l = value(tape, bound);
  tape.backward(l);
  const auto grads = agent::gradients(tape, bound);

  constexpr double h = 1e-5;
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  auto params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].tensor->size(); ++i) {
      double& w = (*params[p].tensor)[i];
      const double w0 = w;
      const auto eval_at = [&](double x) {
        w = x;
        ad::Tape tp;
        const auto bd = agent::bind(tp, net, false);
        return tp.value(value(tp, bd))[0];
      };
      const double numeric = (eval_at(w0 + h) - eval_at(w0 - h)) / (2.0 * h);
      w = w0;
      const double analytic = grads[p][i];
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
    }
  }
  const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  return std::sqrt(diff2) / denom;
}

inline CriterionResult check_autodiff(std::uint64_t seed = 3, std::size_t networks = 100) {
  detail::Stopwatch sw;
  CriterionResult r(5, "autodiff vs central differences");
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < networks; ++i) worst = std::max(worst, network_gradient_error(rng));
  r.seconds = sw.seconds();
  r.passed = worst < 1e-4;
  r.detail = "max relative error " + detail::fmt(worst) + " over " + std::to_string(networks) + " random networks";
  return r;
}

// ---- 6: radius schedule --------------------------------------------------------

inline CriterionResult check_schedule(std::uint64_t seed = 5) {
  detail::Stopwatch sw;
  CriterionResult r(6, "radius schedule");
  std::vector<std::string> failures;
  robust::RobustConfig c;
  c.epsilon0 = 1.0;
  c.sharpness = 1.2e-6;
  c.midpoint = 3.75e6;
  for (const double e0 : {0.5, 1.0, 3.0}) {
    robust::RobustConfig ci = c;
    ci.epsilon0 = e0;
    if (robust::epsilon_schedule(ci.midpoint, ci) != e0 / 2.0) failures.push_back("midpoint value is not eps0/2");
  }
  Rng rng(seed);
  std::uniform_int_distribution<std::uint64_t> step(0, 10'000'000);
  std::vector<std::uint64_t> steps(2000);
  for (auto& s : steps) s = step(rng);
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (!(robust::epsilon_schedule(static_cast<double>(steps[i]), c) <
          robust::epsilon_schedule(static_cast<double>(steps[i - 1]), c))) {
      failures.push_back("not strictly decreasing at step " + std::to_string(steps[i]));
      break;
    }
  }
  const double e_start = robust::epsilon_schedule(0.0, c);
  if (std::abs(e_start - 0.98901) > 1e-5) failures.push_back("initial radius " + detail::fmt(e_start));
  r.seconds = sw.seconds();
  r.passed = failures.empty();
  r.detail = r.passed ? "eps(0) = " + detail::fmt(e_start) + ", midpoint exact, decreasing over " +
                            std::to_string(steps.size()) + " steps"
                      : failures.front();
  return r;
}

// ---- 7: chain degeneration ---------------------------------------------------------

inline experiment::ExperimentConfig chain_comparison_config(agent::AgentKind kind, std::uint64_t steps = 200000) {
  experiment::ExperimentConfig c;
  c.task = experiment::Task::chain;
  c.agent.kind = kind;
  c.agent.loss.kind = loss::LossKind::check;
  c.agent.robust.order = robust::Order::two;
  c.agent.robust.variant = robust::Variant::bounded;
  c.agent.robust.epsilon0 = 1.0;
  // The decay is placed at the same fraction of the run as at full scale.
  c.agent.robust.sharpness = 3.6 / static_cast<double>(steps);
  c.agent.robust.midpoint = 0.197 * static_cast<double>(steps);
  c.agent.network.hidden = 32;
  c.agent.batch_size = 32;
  c.agent.update_period = 8;
  c.agent.train_start = 1000;
  c.agent.target_sync_period = 1000;
  c.total_steps = steps;
  c.eval_period = steps;
  c.eval_episodes = 100;
  c.probe_fractions = 1000;
  c.save_snapshots = false;
  return c;
}

struct ChainComparison {
  std::vector<double> iqn_std, rqiqn_std, true_std;
};

inline ChainComparison run_chain_comparison(const std::vector<std::uint64_t>& seeds, std::uint64_t steps,
                                            const std::function<void(const std::string&)>& log = {}) {
  ChainComparison out;
  experiment::RunOptions quiet;
  quiet.write_files = false;
  for (std::uint64_t s : seeds) {
    const auto a = experiment::run_seed(chain_comparison_config(agent::AgentKind::iqn, steps), s, quiet);
    const auto b = experiment::run_seed(chain_comparison_config(agent::AgentKind::rqiqn, steps), s, quiet);
    out.iqn_std.push_back(a.spread ? a.spread->states[0].learned_std : kNaN);
    out.rqiqn_std.push_back(b.spread ? b.spread->states[0].learned_std : kNaN);
    out.true_std.push_back(a.spread ? a.spread->states[0].analytic_std : kNaN);
    if (log) {
      log("seed " + std::to_string(s) + ": iqn std " + detail::fmt(out.iqn_std.back()) + ", rqiqn std " +
          detail::fmt(out.rqiqn_std.back()) + ", true " + detail::fmt(out.true_std.back()));
    }
  }
  return out;
}

inline CriterionResult check_degeneration(const std::vector<std::uint64_t>& seeds = {0, 1, 2, 3, 4},
                                          std::uint64_t steps = 200000,
                                          const std::function<void(const std::string&)>& log = {}) {
  detail::Stopwatch sw;
  CriterionResult r(7, "chain spread: robust >= plain, closer to truth");
  const ChainComparison c = run_chain_comparison(seeds, steps, log);
  double mean_i = 0.0, mean_r = 0.0;
  std::size_t closer = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    mean_i += c.iqn_std[i] / static_cast<double>(seeds.size());
    mean_r += c.rqiqn_std[i] / static_cast<double>(seeds.size());
    if (std::abs(c.rqiqn_std[i] - c.true_std[i]) < std::abs(c.iqn_std[i] - c.true_std[i])) ++closer;
  }
  const std::size_t needed = (seeds.size() * 3 + 4) / 5;
  r.seconds = sw.seconds();
  r.passed = mean_r >= mean_i && closer >= needed;
  r.detail = "mean state-0 std rqiqn " + detail::fmt(mean_r) + " vs iqn " + detail::fmt(mean_i) + " (true " +
             detail::fmt(c.true_std.empty() ? kNaN : c.true_std[0]) + "), closer in " + std::to_string(closer) + "/" +
             std::to_string(seeds.size()) + " seeds";
  return r;
}

// ---- 8: navigation -------------------------------------------------------------------

struct NavVariant {
  agent::AgentKind kind;
  robust::DistortionKind distortion;
};

inline experiment::ExperimentConfig nav_comparison_config(NavVariant v, std::uint64_t steps = 100000) {
  experiment::ExperimentConfig c;
  c.task = experiment::Task::nav;
  c.agent.kind = v.kind;
  c.agent.distortion.kind = v.distortion;
  c.agent.robust.order = robust::Order::two;
  c.agent.robust.variant = robust::Variant::bounded;
  c.agent.robust.epsilon0 = 1.0;
  c.agent.robust.sharpness = 3.6 / static_cast<double>(steps);
  c.agent.robust.midpoint = 0.197 * static_cast<double>(steps);
  c.agent.network.hidden = 64;
  c.agent.batch_size = 32;
  c.agent.update_period = 4;
  c.agent.train_start = 2000;
  c.agent.target_sync_period = 2000;
  c.agent.replay_capacity = 100000;
  c.agent.exploration = {1.0, 0.05, steps / 5};
  c.total_steps = steps;
  c.eval_period = steps;
  c.eval_episodes = 100;
  c.save_snapshots = false;
  return c;
}

struct NavComparison {
  std::vector<double> iqn_success, rqiqn_success, rqiqn_collision, adaptive_collision;
};

inline NavComparison run_nav_comparison(const std::vector<std::uint64_t>& seeds, std::uint64_t steps,
                                        const std::function<void(const std::string&)>& log = {}) {
  NavComparison out;
  experiment::RunOptions quiet;
  quiet.write_files = false;
  using agent::AgentKind;
  using robust::DistortionKind;
  for (std::uint64_t s : seeds) {
    const auto i = experiment::run_seed(nav_comparison_config({AgentKind::iqn, DistortionKind::identity}, steps), s, quiet);
    const auto r = experiment::run_seed(nav_comparison_config({AgentKind::rqiqn, DistortionKind::identity}, steps), s, quiet);
    const auto a =
        experiment::run_seed(nav_comparison_config({AgentKind::rqiqn, DistortionKind::adaptive_cvar}, steps), s, quiet);
    out.iqn_success.push_back(i.final_eval.success_rate);
    out.rqiqn_success.push_back(r.final_eval.success_rate);
    out.rqiqn_collision.push_back(r.final_eval.collision_rate);
    out.adaptive_collision.push_back(a.final_eval.collision_rate);
    if (log) {
      log("seed " + std::to_string(s) + ": success iqn " + detail::fmt(i.final_eval.success_rate) + " rqiqn " +
          detail::fmt(r.final_eval.success_rate) + " adaptive " + detail::fmt(a.final_eval.success_rate) +
          "; collision iqn " + detail::fmt(i.final_eval.collision_rate) + " rqiqn " +
          detail::fmt(r.final_eval.collision_rate) + " adaptive " + detail::fmt(a.final_eval.collision_rate));
    }
  }
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? kNaN : s / static_cast<double>(v.size());
}

inline CriterionResult check_navigation(const std::vector<std::uint64_t>& seeds = {0, 1, 2},
                                        std::uint64_t steps = 100000,
                                        const std::function<void(const std::string&)>& log = {}) {
  detail::Stopwatch sw;
  CriterionResult r(8, "navigation: robust success >= plain, adaptive collisions <= fixed");
  const NavComparison c = run_nav_comparison(seeds, steps, log);
  const double si = mean_of(c.iqn_success), sr = mean_of(c.rqiqn_success);
  const double cr = mean_of(c.rqiqn_collision), ca = mean_of(c.adaptive_collision);
  r.seconds = sw.seconds();
  r.passed = sr >= si && ca <= cr;
  r.detail = "success rqiqn " + detail::fmt(sr) + " vs iqn " + detail::fmt(si) + "; collision adaptive " +
             detail::fmt(ca) + " vs fixed " + detail::fmt(cr);
  return r;
}

/// Criteria that finish in seconds; the training comparisons are separate.
inline std::vector<CriterionResult> run_fast_suite() {
  return {check_correction_properties(), check_dro_equivalence(), check_coverage(),
          check_exact_reduction(),       check_autodiff(),        check_schedule()};
}

}  // namespace rqiqn::verify
