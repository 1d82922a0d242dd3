#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "kernelband/compatibility.hpp"
#include "kernelband/core.hpp"

namespace kb {

// Three-term score: empirical mean + sqrt(2 ln t / n) + alpha * psi.
// Unpulled pairs (n == 0) score +infinity, which realizes the warm-up phase
// without separate bookkeeping.
double ucb_score(double mean, long count, double t, double psi, double alpha);

// Cluster-level reward statistics keyed by (cluster label, strategy id).
class BanditState {
 public:
  explicit BanditState(int num_strategies);

  int num_strategies() const { return num_strategies_; }
  long completed_rounds() const { return completed_rounds_; }
  // Round index used for the exploration term of the upcoming selection.
  long current_round() const { return completed_rounds_ + 1; }

  double mean(int cluster, StrategyId s) const;  // 0 while unpulled
  long count(int cluster, StrategyId s) const;

  // Running-mean update; exactly one call per completed round.
  void update(int cluster, StrategyId s, double reward);

  // (cluster, strategy) pairs with n == 0 among currently existing clusters.
  std::vector<std::pair<int, StrategyId>> live_pairs(std::span<const int> clusters) const;

  // Text table: cluster, strategy, n, mean.
  void dump(std::ostream& out) const;

 private:
  struct Stat {
    double mean = 0.0;
    long count = 0;
  };

  const Stat* find(int cluster, StrategyId s) const;

  std::vector<std::vector<Stat>> stats_;  // [cluster][strategy]
  int num_strategies_ = 0;
  long completed_rounds_ = 0;
};

struct ArmChoice {
  KernelId kernel_id = 0;
  StrategyId strategy_id = 0;
  double score = 0.0;
  std::size_t member_index = 0;  // position within the pool span
};

// Argmax of ucb_score over every (kernel, strategy) pair. Ties break by
// (i) smaller pull count, (ii) smaller compile time, (iii) smaller
// (kernel id, strategy id).
ArmChoice select_arm(std::span<const KernelCandidate> pool_members,
                     std::span<const int> cluster_labels,
                     std::span<const ProfilingFeatures> phi,
                     const BanditState& state, const CompatibilitySet& compat,
                     double alpha, std::span<const Strategy> strategies);

}  // namespace kb
