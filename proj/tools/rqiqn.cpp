#include <cstdlib>
#include <exception>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rqiqn/experiment/config.hpp"
#include "rqiqn/experiment/metrics.hpp"
#include "rqiqn/experiment/runner.hpp"
#include "rqiqn/experiment/serialization.hpp"
#include "rqiqn/verify/oracles.hpp"
#include "rqiqn/verify/suite.hpp"

namespace {

using namespace rqiqn;
using nlohmann::json;

std::vector<double> parse_samples(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad sample '" + item + "'");
    out.push_back(v);
  }
  return out;
}

json summary_json(const experiment::EvalSummary& s) {
  const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"episodes", s.episodes},
              {"return_mean", num(s.return_mean)},
              {"return_std", num(s.return_std)},
              {"success_rate", num(s.success_rate)},
              {"collision_rate", num(s.collision_rate)},
              {"timeout_rate", num(s.timeout_rate)},
              {"time_succ", num(s.time_succ)},
              {"energy_succ_proxy", num(s.energy_succ)}};
}

json spread_json(const verify::SpreadReport& report) {
  json states = json::array();
  for (const auto& s : report.states) {
    states.push_back({{"state", s.state},
                      {"learned_std", s.learned_std},
                      {"true_std", s.true_std},
                      {"analytic_std", s.analytic_std},
                      {"gap", s.gap}});
  }
  return states;
}

void print_result(const verify::CriterionResult& r) {
  std::cout << (r.passed ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.name << ": " << r.detail << " ("
            << std::fixed << std::setprecision(2) << r.seconds << " s)" << std::defaultfloat << std::endl;
}

int cmd_train(const std::string& config_path, bool quiet) {
  const experiment::ExperimentConfig cfg = experiment::load_config(config_path);
  experiment::RunOptions opts;
  if (!quiet) {
    opts.on_record = [](const experiment::MetricsRecord& r) {
      std::cout << "seed " << r.seed << " step " << r.step << " loss " << r.loss << " eps " << r.epsilon
                << " return " << r.eval_return_mean << " success " << r.success_rate << " collision "
                << r.collision_rate;
      if (r.error) std::cout << " error: " << *r.error;
      std::cout << std::endl;
    };
  }
  const auto results = experiment::run_experiment(cfg, opts);
  int status = 0;
  for (const auto& r : results) {
    if (r.aborted) {
      std::cerr << "seed " << r.seed << " aborted: " << r.error << '\n';
      status = 1;
    }
  }
  std::cout << "metrics written to " << cfg.output_dir << std::endl;
  return status;
}

int cmd_eval(const std::string& snapshot_path, const std::string& config_path, std::size_t episodes,
             std::uint64_t eval_seed) {
  experiment::ExperimentConfig cfg = experiment::load_config(config_path);
  if (episodes > 0) cfg.eval_episodes = episodes;
  auto agent = experiment::build_agent(cfg, cfg.seeds.front());
  experiment::load_snapshot(snapshot_path, *agent);
  const experiment::EvalSummary s = experiment::evaluate_agent(*agent, cfg, eval_seed, agent->step());
  json out{{"snapshot", snapshot_path}, {"step", agent->step()}, {"evaluation", summary_json(s)}};
  if (cfg.task == experiment::Task::chain) {
    out["spread"] = spread_json(
        verify::degeneration_metrics(*agent, cfg.chain, verify::probe_grid(cfg.probe_fractions)));
  }
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_verify(bool full, std::uint64_t chain_steps, std::uint64_t nav_steps) {
  bool ok = true;
  for (const auto& r : verify::run_fast_suite()) {
    print_result(r);
    ok = ok && r.passed;
  }
  if (full) {
    const auto log = [](const std::string& line) { std::cout << "      " << line << std::endl; };
    for (const auto& r : {verify::check_degeneration({0, 1, 2, 3, 4}, chain_steps, log),
                          verify::check_navigation({0, 1, 2}, nav_steps, log)}) {
      print_result(r);
      ok = ok && r.passed;
    }
  }
  std::cout << (ok ? "all checks passed" : "some checks failed") << std::endl;
  return ok ? 0 : 1;
}

int cmd_oracle_dro(double tau, double eps, const std::string& samples, double resolution) {
  verify::EmpiricalTargetLaw law{parse_samples(samples)};
  verify::DroOracleConfig cfg;
  cfg.resolution = resolution;
  cfg.tolerance = std::max(resolution, cfg.tolerance);
  const double slot = verify::empirical_quantile_slot(law, tau);
  const double closed = slot + robust::delta_raw(tau, eps, robust::Order::infinity);
  const double brute = verify::dro_robust_minimizer_bruteforce(law, tau, eps, cfg);
  const double diff = std::abs(brute - closed);
  const bool agree = diff <= resolution * (1.0 + 1e-9);
  std::cout << json{{"tau", tau},
                    {"epsilon", eps},
                    {"samples", law.samples},
                    {"nominal_slot", slot},
                    {"closed_form", closed},
                    {"brute_force", brute},
                    {"abs_difference", diff},
                    {"resolution", resolution},
                    {"agree", agree}}
                   .dump(2)
            << std::endl;
  return agree ? 0 : 1;
}

int cmd_export(const std::string& format, const std::string& input, const std::string& output) {
  const auto records = experiment::load_json_lines(input);
  const auto fmt = format == "csv" ? experiment::ExportFormat::csv : experiment::ExportFormat::json_lines;
  if (output == "-") {
    experiment::export_records(std::cout, records, fmt);
  } else {
    experiment::export_records(output, records, fmt);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust implicit quantile agents: training, evaluation and verification"};
  app.require_subcommand(1);

  std::string config_path, snapshot_path;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train every configured seed and write metrics");
  train->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_flag("-q,--quiet", quiet, "Do not print evaluation records");

  std::size_t episodes = 0;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved snapshot greedily");
  eval->add_option("snapshot", snapshot_path, "Snapshot file")->required()->check(CLI::ExistingFile);
  eval->add_option("config", config_path, "Experiment config used for training")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "Override the number of evaluation episodes");
  eval->add_option("--seed", eval_seed, "Seed for evaluation randomness");

  bool full = false;
  std::uint64_t chain_steps = 200000, nav_steps = 30000;
  auto* verify_cmd = app.add_subcommand("verify", "Run the invariant and oracle suite");
  verify_cmd->add_flag("--full", full, "Also run the chain and navigation training comparisons");
  verify_cmd->add_option("--chain-steps", chain_steps, "Training steps per chain run")->capture_default_str();
  verify_cmd->add_option("--nav-steps", nav_steps, "Training steps per navigation run")->capture_default_str();

  auto* oracle = app.add_subcommand("oracle", "Ad-hoc oracle checks");
  oracle->require_subcommand(1);
  double tau = 0.5, eps = 0.0, resolution = 1e-3;
  std::string samples;
  auto* dro = oracle->add_subcommand("dro", "Compare the brute-force p=inf robust minimiser with the closed form");
  dro->add_option("--tau", tau, "Quantile fraction in (0,1)")->required()->check(CLI::Range(0.0, 1.0));
  dro->add_option("--eps", eps, "Radius >= 0")->required()->check(CLI::NonNegativeNumber);
  dro->add_option("--samples", samples, "Comma-separated target samples")->required();
  dro->add_option("--resolution", resolution, "Grid resolution")->capture_default_str();

  std::string format = "csv", input, output = "-";
  auto* exp = app.add_subcommand("export", "Convert a metrics JSON-lines file");
  exp->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
  exp->add_option("--input", input, "Metrics JSON-lines file")->required()->check(CLI::ExistingFile);
  exp->add_option("--output", output, "Output path, - for stdout")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config_path, quiet);
    if (*eval) return cmd_eval(snapshot_path, config_path, episodes, eval_seed);
    if (*verify_cmd) return cmd_verify(full, chain_steps, nav_steps);
    if (*dro) return cmd_oracle_dro(tau, eps, samples, resolution);
    if (*exp) return cmd_export(format, input, output);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
