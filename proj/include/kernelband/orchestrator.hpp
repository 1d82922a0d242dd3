#pragma once

#include <optional>

#include "kernelband/bandit.hpp"
#include "kernelband/clustering.hpp"
#include "kernelband/core.hpp"
#include "kernelband/environment.hpp"
#include "kernelband/metrics.hpp"
#include "kernelband/simulator.hpp"
#include "kernelband/trajectory.hpp"

namespace kb {

struct RunOptions {
  // Disable clustering: every kernel is its own cluster (flat UCB baseline).
  bool flat_ucb = false;
  // Compatibility warm-start size; 0 keeps the zero-parameter cold start.
  int pretrain_pairs_per_strategy = 0;
};

struct RunResult {
  std::uint64_t seed = 0;
  CandidatePool pool;
  std::vector<PullRecord> trajectory;
  BanditState bandit;
  ClusterModel clusters;
  CompatibilitySet compatibility;
  KernelId best_kernel_id = 0;
  double best_latency_ms = 0.0;
  double initial_best_latency_ms = 0.0;
  std::optional<double> mu_star;
  std::optional<RegretSeries> regret;

  TrajectoryData trajectory_data() const;
};

// One full optimization: exactly config.horizon rounds of cluster refresh /
// feature extraction / arm selection / transform / evaluate / update, then
// the lowest-latency kernel in the pool.
RunResult run_optimization(const Config& config, Environment& environment,
                           std::uint64_t seed, const RunOptions& options = {});

struct ExperimentOptions {
  bool flat_baseline = true;
  int pretrain_pairs_per_strategy = 0;
  // Compatibility-model error used for the bound curve. psi and the success
  // indicator both live in [0, 1], so 1 is always sound.
  double bound_eps_profile = 1.0;
};

struct ExperimentSummary {
  int num_seeds = 0;
  int horizon = 0;
  int num_strategies = 0;
  double alpha = 0.0;
  double mu_star = 0.0;
  double eps_cluster = 0.0;
  double bound_eps_profile = 1.0;

  // Per-round aggregates over seeds (hierarchical runs).
  std::vector<double> mean_cumulative;
  std::vector<double> std_cumulative;
  std::vector<double> mean_cumulative_warmup_excluded;
  std::vector<double> mean_average_reward;
  std::vector<double> bound;

  // Flat-UCB baseline aggregates (empty when disabled).
  std::vector<double> flat_mean_cumulative;
  std::vector<double> flat_std_cumulative;

  // Final cumulative regret per seed, for paired comparisons.
  std::vector<double> final_cumulative;
  std::vector<double> flat_final_cumulative;

  double hierarchical_seconds = 0.0;
  double flat_seconds = 0.0;
};

// Independent seeded runs (config.rng_seed, +1, ...), aggregated per round,
// with the closed-form bound curve and an optional flat-UCB baseline over the
// same seeds.
ExperimentSummary run_regret_experiment(const SimulatorSpec& spec, const Config& config,
                                        int num_seeds, int horizon,
                                        const ExperimentOptions& options = {});

// Delimited series: t, mean/std cumulative regret, warm-up-excluded mean,
// mean average reward, bound, flat mean/std.
void export_experiment_summary(const ExperimentSummary& summary, std::ostream& out);

// Per-run series: t, reward, cumulative_regret, bound_value, average_reward.
void export_run_series(const RunResult& result, std::span<const double> bound_series,
                       std::ostream& out);

}  // namespace kb
