#include "kernelband/orchestrator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <ostream>
#include <semaphore>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "kernelband/log.hpp"

namespace kb {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

TrajectoryData RunResult::trajectory_data() const {
  TrajectoryData data;
  data.seed = seed;
  data.best_kernel_id = best_kernel_id;
  data.best_latency_ms = best_latency_ms;
  data.initial_best_latency_ms = initial_best_latency_ms;
  data.pool_size = pool.size();
  data.trajectory = trajectory;
  return data;
}

RunResult run_optimization(const Config& config, Environment& environment,
                           std::uint64_t seed, const RunOptions& options) {
  const auto& strategies = environment.strategies();
  if (strategies.empty()) {
    throw std::invalid_argument("run_optimization: environment has no strategies");
  }
  const int num_strategies = static_cast<int>(strategies.size());

  std::mt19937_64 rng(seed);

  CandidatePool pool;
  auto seeds = environment.seed_kernels(rng);
  if (seeds.empty()) {
    throw std::runtime_error("environment produced no seed kernel");
  }
  KernelId next_id = 0;
  double initial_best = std::numeric_limits<double>::infinity();
  for (auto& kernel : seeds) {
    if (!kernel.measurement.has_value()) {
      throw std::runtime_error("environment failed to produce the seed measurement");
    }
    initial_best = std::min(initial_best, kernel.measurement->latency_ms);
    next_id = std::max(next_id, kernel.id + 1);
    pool.add(std::move(kernel));
  }

  BanditState bandit(num_strategies);
  CompatibilitySet compatibility(num_strategies, config.buffer_capacity, config.learning_rate,
                                 config.l2_penalty);
  if (options.pretrain_pairs_per_strategy > 0) {
    auto pairs = environment.pretraining_pairs(options.pretrain_pairs_per_strategy, rng);
    compatibility.warm_start(pairs, rng);
  }
  ClusterModel clusters;  // empty model forces a refresh on the first round

  std::vector<PullRecord> trajectory;
  trajectory.reserve(config.horizon);

  for (int t = 1; t <= config.horizon; ++t) {
    const auto members = pool.members();
    const std::size_t n = members.size();

    // Runtime features, re-normalized over the current pool every round.
    std::vector<RuntimeVec> raw_rho(n);
    std::vector<KernelId> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      raw_rho[i] = runtime_feature_vector(*members[i].measurement);
      ids[i] = members[i].id;
    }
    const std::vector<RuntimeVec> rho = zscore_normalize(raw_rho);

    std::vector<int> labels(n);
    if (options.flat_ucb) {
      for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(members[i].id);
    } else {
      if (refresh_due(t, clusters.last_refresh_round, n, clusters.pool_size_at_refresh,
                      config.refresh_interval)) {
        refresh_clusters(clusters, ids, rho, config.num_clusters, t, rng);
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          if (!clusters.assignment.count(ids[i])) {
            assign_new_kernel(clusters, ids[i], rho[i]);
          }
        }
      }
      for (std::size_t i = 0; i < n; ++i) labels[i] = clusters.assignment.at(ids[i]);
    }

    // Profiling features via pool-wide min-max statistics.
    const CounterRanges ranges = counter_ranges(members);
    std::vector<ProfilingFeatures> phi(n);
    for (std::size_t i = 0; i < n; ++i) {
      phi[i] = profiling_feature_vector(members[i].measurement->counters, ranges);
    }

    const ArmChoice choice =
        select_arm(members, labels, phi, bandit, compatibility, config.alpha, strategies);
    // Copy out everything needed past the pool insertion below; `members` may
    // reallocate when the child is added.
    const KernelCandidate& parent = members[choice.member_index];
    const KernelId parent_id = parent.id;
    const int parent_cluster = labels[choice.member_index];
    const ProfilingFeatures parent_phi = phi[choice.member_index];
    const double parent_latency = parent.measurement->latency_ms;

    TransformOutcome outcome = environment.transform(parent, strategies[choice.strategy_id], rng);

    double reward = 0.0;
    std::optional<KernelId> child_id;
    bool child_valid = false;
    std::optional<double> child_latency;
    if (outcome.ok()) {
      Evaluation eval = environment.evaluate(outcome.source, rng);
      const bool usable = eval.valid && eval.measurement.has_value() &&
                          eval.measurement->correctness_passed;
      if (usable) {
        reward = compute_reward(parent_latency, eval.measurement->latency_ms, true,
                                config.reward_clip_floor);
        KernelCandidate child;
        child.id = next_id++;
        child.parent_id = parent_id;
        child.applied_strategy = choice.strategy_id;
        child.source = std::move(outcome.source);
        child.measurement = std::move(eval.measurement);
        child.valid = true;
        child.compile_time_ms = eval.compile_time_ms;
        child_latency = child.measurement->latency_ms;
        child_id = pool.add(std::move(child));
        child_valid = true;
      } else {
        // Evaluated but invalid: consumes an id, never enters the pool.
        child_id = next_id++;
        reward = compute_reward(parent_latency, std::nullopt, false, config.reward_clip_floor);
      }
    } else {
      reward = compute_reward(parent_latency, std::nullopt, false, config.reward_clip_floor);
    }

    bandit.update(parent_cluster, choice.strategy_id, reward);
    compatibility.record_outcome(choice.strategy_id, parent_phi, reward, rng);

    trajectory.push_back({t, parent_id, choice.strategy_id, parent_cluster, choice.score, reward,
                          child_id, child_valid, child_latency});
    log_trace("t=", t, " kernel=", parent_id, " strategy=", choice.strategy_id,
              " cluster=", parent_cluster, " score=", choice.score, " reward=", reward,
              " pool=", pool.size());
    if (log_level() >= LogLevel::kTrace) {
      std::ostringstream table;
      bandit.dump(table);
      log_trace("state after round ", t, ":\n", table.str());
    }
  }

  // Algorithm return: the kernel with the shortest measured latency.
  KernelId best_id = pool.members().front().id;
  double best_latency = pool.members().front().measurement->latency_ms;
  for (const auto& kernel : pool.members()) {
    if (kernel.measurement->latency_ms < best_latency) {
      best_latency = kernel.measurement->latency_ms;
      best_id = kernel.id;
    }
  }

  RunResult result{seed,
                   std::move(pool),
                   std::move(trajectory),
                   std::move(bandit),
                   std::move(clusters),
                   std::move(compatibility),
                   best_id,
                   best_latency,
                   initial_best,
                   std::nullopt,
                   std::nullopt};
  if (auto mu_star = environment.optimal_mean_reward()) {
    result.mu_star = *mu_star;
    result.regret = cumulative_regret(result.trajectory, *mu_star);
  }
  log_info("run seed=", seed, " best_kernel=", best_id, " best_latency_ms=", best_latency,
           " pool=", result.pool.size());
  return result;
}

namespace {

struct RoundAccumulator {
  std::vector<double> sum;
  std::vector<double> sum_sq;

  void add(std::span<const double> series) {
    if (sum.empty()) {
      sum.assign(series.size(), 0.0);
      sum_sq.assign(series.size(), 0.0);
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
      sum[i] += series[i];
      sum_sq[i] += series[i] * series[i];
    }
  }

  std::vector<double> means(int n) const {
    std::vector<double> out(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) out[i] = sum[i] / n;
    return out;
  }

  std::vector<double> stds(int n) const {
    std::vector<double> out(sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const double mean = sum[i] / n;
      const double var = std::max(sum_sq[i] / n - mean * mean, 0.0);
      out[i] = std::sqrt(var);
    }
    return out;
  }
};

// Seeded runs are independent (own environment, own rng), so they execute in
// parallel; collecting futures in seed order keeps the reduction
// deterministic.
std::vector<RegretSeries> run_seed_batch(const SimulatorSpec& spec, const Config& config,
                                         int num_seeds, const RunOptions& options) {
  static std::counting_semaphore<> slots(
      std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::future<RegretSeries>> futures;
  futures.reserve(num_seeds);
  for (int i = 0; i < num_seeds; ++i) {
    futures.push_back(std::async(std::launch::async, [&spec, &config, &options, i] {
      slots.acquire();
      RegretSeries series;
      try {
        SimulatorEnvironment env(spec);
        RunResult result = run_optimization(config, env, config.rng_seed + i, options);
        series = std::move(*result.regret);
      } catch (...) {
        slots.release();
        throw;
      }
      slots.release();
      return series;
    }));
  }
  std::vector<RegretSeries> out;
  out.reserve(num_seeds);
  for (auto& f : futures) out.push_back(f.get());
  return out;
}

}  // namespace

ExperimentSummary run_regret_experiment(const SimulatorSpec& spec, const Config& config,
                                        int num_seeds, int horizon,
                                        const ExperimentOptions& options) {
  if (num_seeds < 1) throw std::invalid_argument("regret experiment: num_seeds must be >= 1");
  if (horizon < 1) throw std::invalid_argument("regret experiment: horizon must be >= 1");
  spec.validate();

  Config run_config = config;
  run_config.horizon = horizon;

  ExperimentSummary summary;
  summary.num_seeds = num_seeds;
  summary.horizon = horizon;
  summary.num_strategies = static_cast<int>(spec.strategies.size());
  summary.alpha = config.alpha;
  summary.mu_star = spec.optimal_mean_reward();
  summary.eps_cluster = spec.cluster_epsilon;
  summary.bound_eps_profile = options.bound_eps_profile;
  summary.bound = regret_bound_series(horizon, summary.num_strategies, spec.cluster_epsilon,
                                      options.bound_eps_profile, config.alpha);

  RunOptions hierarchical{false, options.pretrain_pairs_per_strategy};
  RunOptions flat{true, options.pretrain_pairs_per_strategy};

  using clock = std::chrono::steady_clock;
  RoundAccumulator cum, cum_excl, avg_reward, flat_cum;

  const auto hier_start = clock::now();
  for (const RegretSeries& series : run_seed_batch(spec, run_config, num_seeds, hierarchical)) {
    cum.add(series.cumulative);
    cum_excl.add(series.cumulative_warmup_excluded);
    avg_reward.add(series.average_reward);
    summary.final_cumulative.push_back(series.cumulative.back());
  }
  summary.hierarchical_seconds = std::chrono::duration<double>(clock::now() - hier_start).count();

  summary.mean_cumulative = cum.means(num_seeds);
  summary.std_cumulative = cum.stds(num_seeds);
  summary.mean_cumulative_warmup_excluded = cum_excl.means(num_seeds);
  summary.mean_average_reward = avg_reward.means(num_seeds);

  if (options.flat_baseline) {
    const auto flat_start = clock::now();
    for (const RegretSeries& series : run_seed_batch(spec, run_config, num_seeds, flat)) {
      flat_cum.add(series.cumulative);
      summary.flat_final_cumulative.push_back(series.cumulative.back());
    }
    summary.flat_seconds = std::chrono::duration<double>(clock::now() - flat_start).count();
    summary.flat_mean_cumulative = flat_cum.means(num_seeds);
    summary.flat_std_cumulative = flat_cum.stds(num_seeds);
  }
  return summary;
}

void export_experiment_summary(const ExperimentSummary& summary, std::ostream& out) {
  out << "# kernelband-regret-summary v1\n";
  out << "# num_seeds " << summary.num_seeds << '\n';
  out << "# horizon " << summary.horizon << '\n';
  out << "# num_strategies " << summary.num_strategies << '\n';
  out << "# alpha " << fmt(summary.alpha) << '\n';
  out << "# mu_star " << fmt(summary.mu_star) << '\n';
  out << "# eps_cluster " << fmt(summary.eps_cluster) << '\n';
  out << "# bound_eps_profile " << fmt(summary.bound_eps_profile) << '\n';
  out << "# hierarchical_seconds " << fmt(summary.hierarchical_seconds) << '\n';
  out << "# flat_seconds " << fmt(summary.flat_seconds) << '\n';
  for (std::size_t i = 0; i < summary.final_cumulative.size(); ++i) {
    out << "# final_cumulative seed" << i << ' ' << fmt(summary.final_cumulative[i]);
    if (i < summary.flat_final_cumulative.size()) {
      out << ' ' << fmt(summary.flat_final_cumulative[i]);
    }
    out << '\n';
  }

  const bool have_flat = !summary.flat_mean_cumulative.empty();
  out << "t\tmean_cumulative_regret\tstd_cumulative_regret\tmean_cumulative_warmup_excluded"
         "\tmean_average_reward\tbound";
  if (have_flat) out << "\tflat_mean_cumulative_regret\tflat_std_cumulative_regret";
  out << '\n';
  for (int t = 1; t <= summary.horizon; ++t) {
    const std::size_t i = t - 1;
    out << t << '\t' << fmt(summary.mean_cumulative[i]) << '\t'
        << fmt(summary.std_cumulative[i]) << '\t'
        << fmt(summary.mean_cumulative_warmup_excluded[i]) << '\t'
        << fmt(summary.mean_average_reward[i]) << '\t' << fmt(summary.bound[i]);
    if (have_flat) {
      out << '\t' << fmt(summary.flat_mean_cumulative[i]) << '\t'
          << fmt(summary.flat_std_cumulative[i]);
    }
    out << '\n';
  }
}

void export_run_series(const RunResult& result, std::span<const double> bound_series,
                       std::ostream& out) {
  if (!result.regret.has_value()) {
    throw std::invalid_argument("run series: no ground truth available");
  }
  const RegretSeries& series = *result.regret;
  if (bound_series.size() != series.cumulative.size()) {
    throw std::invalid_argument("run series: bound series length mismatch");
  }
  out << "t\treward\tcumulative_regret\tbound_value\taverage_reward\n";
  for (std::size_t i = 0; i < series.cumulative.size(); ++i) {
    out << (i + 1) << '\t' << fmt(result.trajectory[i].reward) << '\t'
        << fmt(series.cumulative[i]) << '\t' << fmt(bound_series[i]) << '\t'
        << fmt(series.average_reward[i]) << '\n';
  }
}

}  // namespace kb
