#pragma once

#include <span>
#include <vector>

#include "kernelband/core.hpp"

namespace kb {

// Runtime-weighted average of per-item speedups base_i / new_i, with weights
// base_i / sum(base).
double weighted_speedup(std::span<const double> base_times_ms,
                        std::span<const double> new_times_ms);

// Fraction of speedups strictly above the threshold.
double fast_at_1(std::span<const double> speedups, double threshold = 1.1);

double best_speedup(std::span<const double> speedups);

// Cross-kernel aggregate over per-kernel weighted speedups.
double geometric_mean_speedup(std::span<const double> speedups);

// 3|S| sqrt(8 T ln T) + T eps_cluster + T alpha eps_profile, T >= 2.
double regret_bound(double horizon, int num_strategies, double eps_cluster,
                    double eps_profile, double alpha);

// Bound values for t = 1..horizon (the t = 1 point evaluates the same formula,
// where the sqrt term vanishes).
std::vector<double> regret_bound_series(int horizon, int num_strategies,
                                        double eps_cluster, double eps_profile,
                                        double alpha);

struct RegretSeries {
  std::vector<double> instantaneous;        // mu* - r_t
  std::vector<double> cumulative;
  std::vector<double> average_cumulative;   // cumulative / t
  std::vector<double> average_reward;       // (sum of rewards) / t
  // Forced-exploration pulls (infinite selection score) contribute zero here;
  // this is the series the closed-form bound describes.
  std::vector<double> cumulative_warmup_excluded;
};

RegretSeries cumulative_regret(std::span<const PullRecord> trajectory, double mu_star);

}  // namespace kb
