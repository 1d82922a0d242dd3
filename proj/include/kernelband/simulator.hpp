#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "kernelband/environment.hpp"

namespace kb {

// Generators for one behavioral archetype. Counters and runtime metrics draw
// from normal distributions around the template values; achieved occupancy is
// counter index 4 and feeds both feature spaces.
struct ArchetypeTemplate {
  std::string name;
  std::array<double, kProfilingDims> counter_mean{};
  std::array<double, kProfilingDims> counter_std{};
  double mem_footprint_mean = 1.0e6;
  double mem_footprint_std = 0.0;
  double arithmetic_intensity_mean = 1.0;
  double arithmetic_intensity_std = 0.0;
  int block_dim_x = 32;
  int block_dim_y = 1;
  double block_dim_std = 0.0;
  double initial_latency_ms = 10.0;
  bool seeded = true;  // whether a root kernel starts in this archetype
};

struct SimulatorSpec {
  std::vector<Strategy> strategies;
  std::vector<ArchetypeTemplate> archetypes;

  // Success-conditional mean reward and noise per (archetype, strategy).
  std::vector<std::vector<double>> mean_reward;  // in [-1, 1]
  std::vector<std::vector<double>> reward_std;   // >= 0

  std::vector<double> failure_prob;  // per strategy, in [0, 1]

  // Kernels of an archetype deviate from the archetype mean by a fixed
  // per-kernel offset drawn from [-cluster_epsilon, 0].
  double cluster_epsilon = 0.0;

  // Relative per-repetition timing noise; latency reports the mean of
  // timing_repetitions draws taken after timing_warmups discarded ones.
  double measurement_noise_std = 0.0;
  int timing_repetitions = 1000;
  int timing_warmups = 100;

  double compile_time_min_ms = 1.0;
  double compile_time_max_ms = 10.0;

  // Probability that a child re-rolls its archetype instead of inheriting.
  double archetype_mutation_prob = 0.0;

  void validate() const;  // throws std::invalid_argument with the reason

  std::vector<int> seeded_archetypes() const;

  // Best expected arm reward over reachable archetypes, with failures folded
  // in: (1 - f_s) * mu[i][s] - f_s.
  double optimal_mean_reward() const;

  // Expected reward of arm (archetype i, strategy s) for an offset-0 kernel.
  double arm_mean(int archetype, StrategyId s) const;
};

// True iff every archetype pair is >= 10 within-archetype standard deviations
// apart in at least one template-driven runtime dimension (log footprint,
// intensity, block dims, occupancy). Latency is lineage-driven and excluded.
bool archetype_separation_check(const SimulatorSpec& spec);

SimulatorSpec load_simulator_spec(const std::string& path);
SimulatorSpec parse_simulator_spec(const std::string& json_text);
void save_simulator_spec(const SimulatorSpec& spec, const std::string& path);

// Deterministic synthetic environment: a child inherits its parent's
// archetype and its true latency is parent * (1 - r), r ~ N(mean, std)
// truncated at 0.99.
class SimulatorEnvironment final : public Environment {
 public:
  explicit SimulatorEnvironment(SimulatorSpec spec);

  const SimulatorSpec& spec() const { return spec_; }

  const std::vector<Strategy>& strategies() const override { return spec_.strategies; }
  std::vector<KernelCandidate> seed_kernels(std::mt19937_64& rng) override;
  TransformOutcome transform(const KernelCandidate& parent, const Strategy& strategy,
                             std::mt19937_64& rng) override;
  Evaluation evaluate(const std::string& source, std::mt19937_64& rng) override;

  std::optional<double> optimal_mean_reward() const override {
    return spec_.optimal_mean_reward();
  }
  std::optional<double> cluster_epsilon() const override { return spec_.cluster_epsilon; }

  // Random-search pairs: sample a kernel from a seeded archetype, apply the
  // strategy, record the sign of the drawn reward. Features are min-max
  // normalized within the generated batch.
  std::vector<std::vector<LabeledSample>> pretraining_pairs(int per_strategy,
                                                            std::mt19937_64& rng) override;

  int archetype_of(const std::string& source) const;

 private:
  struct KernelTruth {
    int archetype = 0;
    double log_latency = 0.0;              // true latency, log scale
    std::vector<double> strategy_offset;   // per-kernel reward offsets
  };

  std::array<double, kProfilingDims> draw_counters(int archetype, std::mt19937_64& rng);
  MeasurementRecord measure(const KernelTruth& truth, std::mt19937_64& rng);
  double draw_compile_time(std::mt19937_64& rng);
  std::vector<double> draw_offsets(std::mt19937_64& rng);

  SimulatorSpec spec_;
  std::unordered_map<std::string, KernelTruth> truths_;
  long next_token_ = 0;
};

}  // namespace kb
