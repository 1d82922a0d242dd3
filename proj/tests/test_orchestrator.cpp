#include <cmath>
#include <map>
#include <sstream>

#include "doctest.h"
#include "kernelband/orchestrator.hpp"
#include "sim_specs.hpp"

using namespace kb;

namespace {

Config quiet_config(int horizon, double alpha = 0.0) {
  Config cfg;
  cfg.horizon = horizon;
  cfg.alpha = alpha;
  cfg.rng_seed = 1;
  return cfg;
}

struct NoSeedEnvironment final : Environment {
  std::vector<Strategy> strategy_list = {{0, "s0", "s0"}};
  const std::vector<Strategy>& strategies() const override { return strategy_list; }
  std::vector<KernelCandidate> seed_kernels(std::mt19937_64&) override { return {}; }
  TransformOutcome transform(const KernelCandidate&, const Strategy&, std::mt19937_64&) override {
    return TransformOutcome::generation_failure();
  }
  Evaluation evaluate(const std::string&, std::mt19937_64&) override { return {}; }
};

// Generates fine, but every candidate flunks the correctness check at
// evaluation time.
struct IncorrectOutputEnvironment final : Environment {
  std::vector<Strategy> strategy_list = {{0, "s0", "s0"}};
  int evaluations = 0;

  const std::vector<Strategy>& strategies() const override { return strategy_list; }
  std::vector<KernelCandidate> seed_kernels(std::mt19937_64&) override {
    KernelCandidate seed;
    seed.id = 0;
    seed.source = "seed";
    MeasurementRecord m;
    m.latency_ms = 10.0;
    m.mem_footprint_bytes = 1e6;
    seed.measurement = m;
    seed.compile_time_ms = 1.0;
    return {seed};
  }
  TransformOutcome transform(const KernelCandidate&, const Strategy&, std::mt19937_64&) override {
    return TransformOutcome::success("child");
  }
  Evaluation evaluate(const std::string&, std::mt19937_64&) override {
    ++evaluations;
    Evaluation eval;
    eval.valid = true;
    MeasurementRecord m;
    m.latency_ms = 5.0;
    m.mem_footprint_bytes = 1e6;
    m.correctness_passed = false;
    eval.measurement = m;
    eval.compile_time_ms = 1.0;
    return eval;
  }
};

}  // namespace

TEST_CASE("run: zero rounds returns the seed kernel") {
  SimulatorEnvironment env(testspec::unique_optimal_spec());
  const RunResult result = run_optimization(quiet_config(0), env, 7);
  CHECK(result.trajectory.empty());
  CHECK(result.pool.size() == 1);
  CHECK(result.best_kernel_id == 0);
  CHECK(result.best_latency_ms == result.pool.at(0).measurement->latency_ms);
}

TEST_CASE("run: certain failure leaves the pool at the seeds") {
  SimulatorSpec spec = testspec::unique_optimal_spec();
  spec.failure_prob = {1.0, 1.0};
  SimulatorEnvironment env(spec);
  const RunResult result = run_optimization(quiet_config(5), env, 7);
  CHECK(result.pool.size() == 1);
  CHECK(result.best_kernel_id == 0);
  REQUIRE(result.trajectory.size() == 5);
  for (const auto& pull : result.trajectory) {
    CHECK(pull.reward == -1.0);
    CHECK_FALSE(pull.child_valid);
    CHECK_FALSE(pull.child_id.has_value());
  }
}

TEST_CASE("run: missing seed measurement aborts with a diagnostic") {
  NoSeedEnvironment env;
  CHECK_THROWS_WITH_AS(run_optimization(quiet_config(1), env, 1),
                       doctest::Contains("seed"), std::runtime_error);
}

TEST_CASE("run: evaluated-but-incorrect children consume ids outside the pool") {
  IncorrectOutputEnvironment env;
  const RunResult result = run_optimization(quiet_config(4), env, 1);
  CHECK(env.evaluations == 4);
  CHECK(result.pool.size() == 1);  // nothing correct ever joined
  for (const auto& pull : result.trajectory) {
    CHECK(pull.reward == -1.0);
    CHECK_FALSE(pull.child_valid);
    REQUIRE(pull.child_id.has_value());       // an id was issued...
    CHECK_FALSE(result.pool.contains(*pull.child_id));  // ...but never pooled
  }
}

TEST_CASE("run: unique optimal arm is pulled every post-warm-up round") {
  SimulatorEnvironment env(testspec::unique_optimal_spec());
  Config cfg = quiet_config(15);
  cfg.num_clusters = 1;  // single behavioral archetype
  const RunResult result = run_optimization(cfg, env, 3);

  // The environment's true argmax: strategy 0 in the single cluster.
  REQUIRE(result.trajectory.size() == 15);
  int warm_up_rounds = 0;
  for (const auto& pull : result.trajectory) {
    if (std::isinf(pull.ucb_score)) {
      ++warm_up_rounds;
      continue;
    }
    CHECK(pull.strategy_id == 0);
    CHECK(pull.reward == doctest::Approx(0.9).epsilon(1e-9));
  }
  CHECK(warm_up_rounds == 2);  // one cluster x two strategies
}

TEST_CASE("run: round accounting and the return contract") {
  SimulatorEnvironment env(testspec::zero_noise_spec());
  const RunResult result = run_optimization(quiet_config(40), env, 11);

  CHECK(result.trajectory.size() == 40);
  std::size_t valid_children = 0;
  for (const auto& pull : result.trajectory) {
    if (pull.child_valid) ++valid_children;
  }
  CHECK(result.pool.size() == 3 + valid_children);  // three seeded archetypes

  double best = std::numeric_limits<double>::infinity();
  KernelId best_id = -1;
  for (const auto& kernel : result.pool.members()) {
    if (kernel.measurement->latency_ms < best) {
      best = kernel.measurement->latency_ms;
      best_id = kernel.id;
    }
  }
  CHECK(result.best_kernel_id == best_id);
  CHECK(result.best_latency_ms == best);
}

TEST_CASE("run: warm-up covers every (cluster, strategy) pair by round 3|S|") {
  SimulatorEnvironment env(testspec::zero_noise_spec());
  const RunResult result = run_optimization(quiet_config(15), env, 11);
  const int clusters[] = {0, 1, 2};
  CHECK(result.bandit.live_pairs(clusters).empty());
  CHECK(result.bandit.completed_rounds() == 15);
}

TEST_CASE("run: regret series is attached when ground truth exists") {
  SimulatorEnvironment env(testspec::zero_noise_spec());
  const RunResult result = run_optimization(quiet_config(25), env, 5);
  REQUIRE(result.mu_star.has_value());
  CHECK(*result.mu_star == doctest::Approx(0.9));
  REQUIRE(result.regret.has_value());
  CHECK(result.regret->cumulative.size() == 25);
}

TEST_CASE("run: lineage products of measured rewards identify the best kernel") {
  // On a zero-noise spec the measured latency of any kernel equals its root
  // seed latency times the product of (1 - r) along its lineage, so the
  // maximal cumulative reduction and the minimal latency pick the same kernel.
  SimulatorEnvironment env(testspec::zero_noise_spec());
  const RunResult result = run_optimization(quiet_config(60), env, 19);

  std::map<KernelId, double> reward_of_child;
  for (const auto& pull : result.trajectory) {
    if (pull.child_valid) reward_of_child[*pull.child_id] = pull.reward;
  }

  KernelId predicted = -1;
  double predicted_latency = std::numeric_limits<double>::infinity();
  for (const auto& kernel : result.pool.members()) {
    const auto chain = candidate_lineage(result.pool, kernel.id);
    double latency = result.pool.at(chain.front().kernel_id).measurement->latency_ms;
    for (std::size_t i = 1; i < chain.size(); ++i) {
      latency *= 1.0 - reward_of_child.at(chain[i].kernel_id);
    }
    if (latency < predicted_latency) {
      predicted_latency = latency;
      predicted = kernel.id;
    }
  }
  CHECK(predicted == result.best_kernel_id);
  CHECK(predicted_latency == doctest::Approx(result.best_latency_ms).epsilon(1e-6));
}

TEST_CASE("export: byte-identical across reruns, exact round trip") {
  SimulatorEnvironment env_a(testspec::zero_noise_spec());
  SimulatorEnvironment env_b(testspec::zero_noise_spec());
  const Config cfg = quiet_config(30);
  const RunResult a = run_optimization(cfg, env_a, 23);
  const RunResult b = run_optimization(cfg, env_b, 23);

  std::ostringstream export_a, export_b;
  export_trajectory(a.trajectory_data(), export_a, "tsv");
  export_trajectory(b.trajectory_data(), export_b, "tsv");
  CHECK(export_a.str() == export_b.str());

  std::istringstream in(export_a.str());
  const TrajectoryData loaded = load_trajectory(in);
  CHECK(loaded.seed == 23);
  CHECK(loaded.best_kernel_id == a.best_kernel_id);
  CHECK(loaded.best_latency_ms == a.best_latency_ms);
  CHECK(loaded.initial_best_latency_ms == a.initial_best_latency_ms);
  CHECK(loaded.pool_size == a.pool.size());
  REQUIRE(loaded.trajectory.size() == a.trajectory.size());
  for (std::size_t i = 0; i < loaded.trajectory.size(); ++i) {
    const PullRecord& x = loaded.trajectory[i];
    const PullRecord& y = a.trajectory[i];
    CHECK(x.round == y.round);
    CHECK(x.kernel_id == y.kernel_id);
    CHECK(x.strategy_id == y.strategy_id);
    CHECK(x.cluster_index == y.cluster_index);
    CHECK(x.ucb_score == y.ucb_score);
    CHECK(x.reward == y.reward);
    CHECK(x.child_id == y.child_id);
    CHECK(x.child_valid == y.child_valid);
    CHECK(x.child_latency_ms == y.child_latency_ms);
  }
}

TEST_CASE("export: csv variant and unsupported formats") {
  SimulatorEnvironment env(testspec::unique_optimal_spec());
  const RunResult result = run_optimization(quiet_config(4), env, 2);

  std::ostringstream csv;
  export_trajectory(result.trajectory_data(), csv, "csv");
  std::istringstream in(csv.str());
  const TrajectoryData loaded = load_trajectory(in);
  CHECK(loaded.trajectory.size() == 4);
  CHECK(loaded.trajectory[1].reward == result.trajectory[1].reward);

  std::ostringstream sink;
  CHECK_THROWS_AS(export_trajectory(result.trajectory_data(), sink, "parquet"),
                  std::invalid_argument);
}

TEST_CASE("export: empty trajectory writes a header-only file") {
  SimulatorEnvironment env(testspec::unique_optimal_spec());
  const RunResult result = run_optimization(quiet_config(0), env, 2);
  std::ostringstream out;
  export_trajectory(result.trajectory_data(), out, "tsv");
  std::istringstream in(out.str());
  const TrajectoryData loaded = load_trajectory(in);
  CHECK(loaded.trajectory.empty());
  CHECK(loaded.pool_size == 1);
}

TEST_CASE("experiment: single-seed single-round summary") {
  const ExperimentSummary summary =
      run_regret_experiment(testspec::zero_noise_spec(), quiet_config(1), 1, 1);
  CHECK(summary.num_seeds == 1);
  CHECK(summary.mean_cumulative.size() == 1);
  CHECK(summary.flat_mean_cumulative.size() == 1);
  CHECK(summary.final_cumulative.size() == 1);
  CHECK(summary.bound.size() == 1);
  CHECK(summary.mu_star == doctest::Approx(0.9));
}

TEST_CASE("experiment: hierarchical beats flat and respects the bound (short run)") {
  const ExperimentSummary summary =
      run_regret_experiment(testspec::zero_noise_spec(), quiet_config(300), 5, 300);

  CHECK(summary.mean_cumulative.back() < summary.flat_mean_cumulative.back());
  for (int t = 0; t < summary.horizon; ++t) {
    CHECK(summary.mean_cumulative_warmup_excluded[t] <= summary.bound[t] + 1e-9);
  }

  std::ostringstream out;
  export_experiment_summary(summary, out);
  CHECK(out.str().find("mean_cumulative_regret") != std::string::npos);
  CHECK(out.str().find("# mu_star") != std::string::npos);
}

TEST_CASE("experiment: parallel seed execution reduces deterministically") {
  const auto first =
      run_regret_experiment(testspec::zero_noise_spec(), quiet_config(120), 6, 120);
  const auto second =
      run_regret_experiment(testspec::zero_noise_spec(), quiet_config(120), 6, 120);
  CHECK(first.mean_cumulative == second.mean_cumulative);
  CHECK(first.std_cumulative == second.std_cumulative);
  CHECK(first.final_cumulative == second.final_cumulative);
  CHECK(first.flat_mean_cumulative == second.flat_mean_cumulative);
}

TEST_CASE("experiment: per-run series export") {
  SimulatorEnvironment env(testspec::zero_noise_spec());
  const Config cfg = quiet_config(10);
  const RunResult result = run_optimization(cfg, env, 3);
  const auto bound = regret_bound_series(10, 5, 0.0, 1.0, cfg.alpha);
  std::ostringstream out;
  export_run_series(result, bound, out);
  CHECK(out.str().find("cumulative_regret") != std::string::npos);
  // 1 header + 10 rows
  int lines = 0;
  for (char c : out.str()) lines += c == '\n';
  CHECK(lines == 11);
}
