#include "kernelband/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace kb {

namespace {

void require_positive(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (v <= 0.0) throw std::domain_error(std::string(what) + " must be positive");
  }
}

double bound_value(double t, int num_strategies, double eps_cluster, double eps_profile,
                   double alpha) {
  return 3.0 * num_strategies * std::sqrt(8.0 * t * std::log(t)) + t * eps_cluster +
         t * alpha * eps_profile;
}

}  // namespace

double weighted_speedup(std::span<const double> base_times_ms,
                        std::span<const double> new_times_ms) {
  if (base_times_ms.empty() || base_times_ms.size() != new_times_ms.size()) {
    throw std::invalid_argument("weighted_speedup: need equally sized nonempty inputs");
  }
  require_positive(base_times_ms, "weighted_speedup: base times");
  require_positive(new_times_ms, "weighted_speedup: new times");

  double total_base = 0.0;
  for (double b : base_times_ms) total_base += b;
  double acc = 0.0;
  for (std::size_t i = 0; i < base_times_ms.size(); ++i) {
    const double weight = base_times_ms[i] / total_base;
    acc += weight * (base_times_ms[i] / new_times_ms[i]);
  }
  return acc;
}

double fast_at_1(std::span<const double> speedups, double threshold) {
  if (speedups.empty()) throw std::invalid_argument("fast_at_1: empty input");
  std::size_t fast = 0;
  for (double s : speedups) {
    if (s > threshold) ++fast;
  }
  return static_cast<double>(fast) / static_cast<double>(speedups.size());
}

double best_speedup(std::span<const double> speedups) {
  if (speedups.empty()) throw std::invalid_argument("best_speedup: empty input");
  double best = speedups[0];
  for (double s : speedups) best = std::max(best, s);
  return best;
}

double geometric_mean_speedup(std::span<const double> speedups) {
  if (speedups.empty()) throw std::invalid_argument("geometric_mean_speedup: empty input");
  require_positive(speedups, "geometric_mean_speedup: speedups");
  double log_sum = 0.0;
  for (double s : speedups) log_sum += std::log(s);
  return std::exp(log_sum / static_cast<double>(speedups.size()));
}

double regret_bound(double horizon, int num_strategies, double eps_cluster,
                    double eps_profile, double alpha) {
  if (horizon < 2.0) throw std::invalid_argument("regret_bound: horizon must be >= 2");
  if (num_strategies < 1) throw std::invalid_argument("regret_bound: need strategies");
  return bound_value(horizon, num_strategies, eps_cluster, eps_profile, alpha);
}

std::vector<double> regret_bound_series(int horizon, int num_strategies, double eps_cluster,
                                        double eps_profile, double alpha) {
  std::vector<double> series;
  series.reserve(horizon);
  for (int t = 1; t <= horizon; ++t) {
    series.push_back(bound_value(t, num_strategies, eps_cluster, eps_profile, alpha));
  }
  return series;
}

RegretSeries cumulative_regret(std::span<const PullRecord> trajectory, double mu_star) {
  RegretSeries series;
  const std::size_t n = trajectory.size();
  series.instantaneous.reserve(n);
  series.cumulative.reserve(n);
  series.average_cumulative.reserve(n);
  series.average_reward.reserve(n);
  series.cumulative_warmup_excluded.reserve(n);

  double cum = 0.0;
  double cum_excl = 0.0;
  double reward_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const PullRecord& pull = trajectory[i];
    const double inst = mu_star - pull.reward;
    cum += inst;
    if (!std::isinf(pull.ucb_score)) cum_excl += inst;
    reward_sum += pull.reward;
    const double t = static_cast<double>(i + 1);

    series.instantaneous.push_back(inst);
    series.cumulative.push_back(cum);
    series.average_cumulative.push_back(cum / t);
    series.average_reward.push_back(reward_sum / t);
    series.cumulative_warmup_excluded.push_back(cum_excl);
  }
  return series;
}

}  // namespace kb
