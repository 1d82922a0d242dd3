#include "kernelband/bandit.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace kb {

double ucb_score(double mean, long count, double t, double psi, double alpha) {
  if (t < 1.0) throw std::invalid_argument("ucb_score: t must be >= 1");
  if (count < 0) throw std::invalid_argument("ucb_score: negative count");
  if (count == 0) return std::numeric_limits<double>::infinity();
  return mean + std::sqrt(2.0 * std::log(t) / static_cast<double>(count)) + alpha * psi;
}

BanditState::BanditState(int num_strategies) : num_strategies_(num_strategies) {
  if (num_strategies < 1) throw std::invalid_argument("bandit: need at least one strategy");
}

const BanditState::Stat* BanditState::find(int cluster, StrategyId s) const {
  if (cluster < 0 || s < 0 || s >= num_strategies_) return nullptr;
  if (static_cast<std::size_t>(cluster) >= stats_.size()) return nullptr;
  return &stats_[cluster][s];
}

double BanditState::mean(int cluster, StrategyId s) const {
  const Stat* stat = find(cluster, s);
  return stat != nullptr ? stat->mean : 0.0;
}

long BanditState::count(int cluster, StrategyId s) const {
  const Stat* stat = find(cluster, s);
  return stat != nullptr ? stat->count : 0;
}

void BanditState::update(int cluster, StrategyId s, double reward) {
  if (cluster < 0) throw std::invalid_argument("bandit: negative cluster label");
  if (s < 0 || s >= num_strategies_) throw std::invalid_argument("bandit: bad strategy id");
  if (static_cast<std::size_t>(cluster) >= stats_.size()) {
    stats_.resize(cluster + 1, std::vector<Stat>(num_strategies_));
  }
  Stat& stat = stats_[cluster][s];
  ++stat.count;
  stat.mean += (reward - stat.mean) / static_cast<double>(stat.count);
  ++completed_rounds_;
}

std::vector<std::pair<int, StrategyId>> BanditState::live_pairs(
    std::span<const int> clusters) const {
  std::vector<std::pair<int, StrategyId>> pairs;
  for (int cluster : clusters) {
    for (StrategyId s = 0; s < num_strategies_; ++s) {
      if (count(cluster, s) == 0) pairs.emplace_back(cluster, s);
    }
  }
  return pairs;
}

void BanditState::dump(std::ostream& out) const {
  out << "cluster\tstrategy\tn\tmean\n";
  for (std::size_t c = 0; c < stats_.size(); ++c) {
    for (StrategyId s = 0; s < num_strategies_; ++s) {
      const Stat& stat = stats_[c][s];
      out << c << '\t' << s << '\t' << stat.count << '\t' << stat.mean << '\n';
    }
  }
}

ArmChoice select_arm(std::span<const KernelCandidate> pool_members,
                     std::span<const int> cluster_labels,
                     std::span<const ProfilingFeatures> phi,
                     const BanditState& state, const CompatibilitySet& compat,
                     double alpha, std::span<const Strategy> strategies) {
  if (pool_members.empty()) throw std::invalid_argument("select_arm: empty pool");
  if (pool_members.size() != cluster_labels.size() || pool_members.size() != phi.size()) {
    throw std::invalid_argument("select_arm: parallel arrays must match the pool");
  }

  const double t = static_cast<double>(state.current_round());
  bool have_best = false;
  ArmChoice best;
  long best_count = 0;
  double best_compile = 0.0;

  for (std::size_t i = 0; i < pool_members.size(); ++i) {
    const KernelCandidate& kernel = pool_members[i];
    const int cluster = cluster_labels[i];
    for (const Strategy& strategy : strategies) {
      const long n = state.count(cluster, strategy.id);
      const double psi = alpha != 0.0 ? compat.predict(strategy.id, phi[i]) : 0.0;
      const double score = ucb_score(state.mean(cluster, strategy.id), n, t, psi, alpha);

      bool take = false;
      if (!have_best || score > best.score) {
        take = true;
      } else if (score == best.score) {
        if (n < best_count) {
          take = true;
        } else if (n == best_count && kernel.compile_time_ms < best_compile) {
          take = true;
        }
        // Remaining ties keep the incumbent: iteration order is ascending
        // (kernel id, strategy id).
      }
      if (take) {
        have_best = true;
        best = {kernel.id, strategy.id, score, i};
        best_count = n;
        best_compile = kernel.compile_time_ms;
      }
    }
  }
  return best;
}

}  // namespace kb
