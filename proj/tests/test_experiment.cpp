#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "rqiqn/experiment/config.hpp"
#include "rqiqn/experiment/metrics.hpp"
#include "rqiqn/experiment/runner.hpp"
#include "rqiqn/experiment/serialization.hpp"

using namespace rqiqn;
using namespace rqiqn::experiment;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rqiqn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentConfig tiny_chain(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.task = Task::chain;
  c.agent.network.hidden = 8;
  c.agent.network.cosine_features = 8;
  c.agent.batch_size = 4;
  c.agent.train_start = 10;
  c.agent.target_sync_period = 20;
  c.total_steps = 60;
  c.eval_period = 30;
  c.eval_episodes = 3;
  c.probe_fractions = 10;
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST(Config, ParsesNestedSections) {
  const json j = json::parse(R"({
    "task": "nav",
    "agent": {"kind": "iqn", "gamma": 0.95, "loss": {"kind": "quantile_huber", "kappa": 2.0},
              "robust": {"order": "infinity", "variant": "raw"}, "network": {"hidden": 16},
              "distortion": {"kind": "adaptive_cvar", "eta_min": 0.3}, "train_start": 10},
    "nav": {"obstacle_count": 2},
    "total_steps": 100, "seeds": [4, 5]
  })");
  const ExperimentConfig c = parse_config(j);
  EXPECT_EQ(c.task, Task::nav);
  EXPECT_EQ(c.agent.kind, agent::AgentKind::iqn);
  EXPECT_EQ(c.agent.loss.kind, loss::LossKind::quantile_huber);
  EXPECT_EQ(c.agent.loss.kappa, 2.0);
  EXPECT_EQ(c.agent.robust.order, robust::Order::infinity);
  EXPECT_EQ(c.agent.robust.variant, robust::Variant::raw);
  EXPECT_EQ(c.agent.network.hidden, 16U);
  EXPECT_EQ(c.agent.distortion.kind, robust::DistortionKind::adaptive_cvar);
  EXPECT_EQ(c.nav.obstacle_count, 2);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(c.chain.gamma, 0.95);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(json::parse(R"({"totl_steps": 5})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"agent": {"loss": {"kapa": 1}}})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"agent": {"kind": "c51"}})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"seeds": "zero"})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"seeds": []})")), ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"agent": {"loss": {"kind": "quantile_huber", "kappa": 0}}})")),
               loss::ConfigError);
  EXPECT_THROW(parse_config(json::parse(R"({"total_steps": 10, "agent": {"train_start": 10}})")), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, HashIgnoresTheSeedButNotHyperparameters) {
  agent::AgentConfig a, b;
  b.seed = 99;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.num_fractions = 9;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Metrics, EmptyCsvIsHeaderOnly) {
  std::ostringstream os;
  export_records(os, {}, ExportFormat::csv, 3);
  EXPECT_EQ(os.str(),
            "step,loss,epsilon,eval_return_mean,eval_return_std,success_rate,collision_rate,timeout_rate,"
            "probe_state_std_0,probe_state_std_1,probe_state_std_2,time_succ,energy_succ_proxy,wall_clock,seed,error\n");
}

TEST(Metrics, OneRecordGivesTwoCsvLinesWithBlankMissingValues) {
  MetricsRecord r;
  r.step = 7;
  r.loss = 0.5;
  r.error = "bad, value";
  std::ostringstream os;
  export_records(os, {r}, ExportFormat::csv);
  const std::string s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2);
  EXPECT_NE(s.find("\n7,0.5,0,,,,,,,,0,0,bad; value\n"), std::string::npos) << s;
}

TEST(Metrics, JsonLinesRoundTrip) {
  MetricsRecord a;
  a.seed = 3;
  a.step = 100;
  a.loss = 0.1;
  a.epsilon = 0.25;
  a.success_rate = 0.5;
  a.probe_state_std = {1.0, std::nan(""), 2.0};
  a.wall_clock = 1.5;
  MetricsRecord b = a;
  b.step = 200;
  b.error = "boom";
  std::stringstream ss;
  export_records(ss, {a, b}, ExportFormat::json_lines);
  const auto back = parse_json_lines(ss);
  ASSERT_EQ(back.size(), 2U);
  EXPECT_TRUE(same_record(back[0], a));
  EXPECT_TRUE(same_record(back[1], b));
  EXPECT_TRUE(std::isnan(back[0].collision_rate));
}

TEST(Snapshot, RoundTripRestoresEveryAgentKind) {
  const auto dir = scratch("snapshot");
  for (const auto kind : {agent::AgentKind::dqn, agent::AgentKind::iqn, agent::AgentKind::rqiqn}) {
    ExperimentConfig c = tiny_chain(dir);
    c.agent.kind = kind;
    c.save_snapshots = true;
    const SeedResult r = run_seed(c, 1);
    const std::string path = run_file(c, "snapshot", 1, ".json");
    ASSERT_TRUE(std::filesystem::exists(path));
    auto fresh = build_agent(c, 1);
    load_snapshot(path, *fresh);
    EXPECT_EQ(fresh->step(), 60U);
    const std::vector<double> obs{1, 0, 0, 0}, taus{0.1, 0.5, 0.9};
    EXPECT_EQ(fresh->quantiles(obs, taus).storage(), r.agent->quantiles(obs, taus).storage());
  }
}

TEST(Snapshot, RejectsAMismatchedConfiguration) {
  const auto dir = scratch("snapshot_hash");
  ExperimentConfig c = tiny_chain(dir);
  run_seed(c, 0);
  ExperimentConfig other = c;
  other.agent.network.hidden = 9;
  auto a = build_agent(other, 0);
  EXPECT_THROW(load_snapshot(run_file(c, "snapshot", 0, ".json"), *a), IoError);
  EXPECT_THROW(load_snapshot((dir / "missing.json").string(), *a), IoError);
}

TEST(Layouts, FileRoundTrip) {
  const auto dir = scratch("layouts");
  const std::vector<env::Layout> ls{env::sample_layout(env::NavConfig{}, 1), env::sample_layout(env::NavConfig{}, 2)};
  save_layouts((dir / "l.json").string(), ls);
  EXPECT_EQ(load_layouts((dir / "l.json").string()), ls);
}

TEST(Runner, ZeroStepsWritesAnEmptyMetricsFile) {
  const auto dir = scratch("zero");
  ExperimentConfig c = tiny_chain(dir);
  c.total_steps = 0;
  const auto results = run_experiment(c);
  ASSERT_EQ(results.size(), 1U);
  EXPECT_TRUE(results[0].records.empty());
  const std::string path = run_file(c, "metrics", 0, ".jsonl");
  ASSERT_TRUE(std::filesystem::exists(path));
  EXPECT_EQ(std::filesystem::file_size(path), 0U);
  EXPECT_FALSE(std::filesystem::exists(run_file(c, "snapshot", 0, ".json")));
}

TEST(Runner, EvaluatesOnThePeriodAndAtTheEnd) {
  const auto dir = scratch("period");
  ExperimentConfig c = tiny_chain(dir);
  c.total_steps = 70;
  const SeedResult r = run_seed(c, 2);
  ASSERT_EQ(r.records.size(), 3U);
  EXPECT_EQ(r.records[0].step, 30U);
  EXPECT_EQ(r.records[1].step, 60U);
  EXPECT_EQ(r.records[2].step, 70U);
  EXPECT_EQ(r.records[0].probe_state_std.size(), 3U);
  ASSERT_TRUE(r.spread.has_value());
  const auto on_disk = load_json_lines(run_file(c, "metrics", 2, ".jsonl"));
  ASSERT_EQ(on_disk.size(), 3U);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(same_record(on_disk[i], r.records[i]));
  EXPECT_TRUE(std::filesystem::exists(run_file(c, "quantiles", 2, ".csv")));
}

TEST(Runner, NonFiniteRewardAbortsTheSeedWithAnErrorRecord) {
  const auto dir = scratch("nan");
  ExperimentConfig c = tiny_chain(dir);
  c.chain.mixture_mean = std::nan("");
  const SeedResult r = run_seed(c, 0);
  EXPECT_TRUE(r.aborted);
  ASSERT_EQ(r.records.size(), 1U);
  EXPECT_EQ(r.records[0].step, 3U);
  ASSERT_TRUE(r.records[0].error.has_value());
  EXPECT_NE(r.records[0].error->find("non-finite"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(run_file(c, "snapshot", 0, ".json")));
}

TEST(Runner, UnwritableOutputIsAnError) {
  ExperimentConfig c = tiny_chain("/proc/rqiqn_cannot_write_here");
  EXPECT_ANY_THROW(run_seed(c, 0));
}

TEST(Runner, SameSeedSameStream) {
  const auto dir = scratch("det");
  ExperimentConfig c = tiny_chain(dir);
  c.task = Task::nav;
  c.nav.episode_cap = 20;
  c.eval_episodes = 2;
  RunOptions opts;
  opts.write_files = false;
  const auto a = run_seed(c, 5, opts), b = run_seed(c, 5, opts);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_TRUE(same_record(a.records[i], b.records[i], true));
}

TEST(Seeds, TrainingAndEvaluationLayoutsNeverCoincide) {
  for (std::uint64_t i = 0; i < 1000; ++i) {
    EXPECT_EQ(training_layout_seed(1, 3, i) % 2, 0U);
    EXPECT_EQ(evaluation_layout_seed(1, i) % 2, 1U);
  }
}
