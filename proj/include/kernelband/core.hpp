#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kb {

using KernelId = std::int64_t;
using StrategyId = int;

inline constexpr std::size_t kProfilingDims = 9;
inline constexpr std::size_t kRuntimeDims = 6;

// Fixed profiling counter order. achieved_occupancy (index 4) is the single
// occupancy value shared by the profiling and runtime feature vectors.
enum CounterIndex : std::size_t {
  kL2Hit = 0,
  kMemBw,
  kSmUtil,
  kWarpEff,
  kAchievedOccupancy,
  kRegPerThread,
  kSharedConflicts,
  kLoadStoreCoalesced,
  kTensorCoreUtil,
};

extern const std::array<const char*, kProfilingDims> kCounterNames;

struct MeasurementRecord {
  double latency_ms = 0.0;
  double mem_footprint_bytes = 0.0;
  double arithmetic_intensity = 0.0;
  int block_dim_x = 1;
  int block_dim_y = 1;
  std::array<double, kProfilingDims> counters{};
  bool correctness_passed = true;
};

struct Strategy {
  StrategyId id = 0;
  std::string name;
  std::string description;
};

struct KernelCandidate {
  KernelId id = 0;
  std::optional<KernelId> parent_id;
  std::optional<StrategyId> applied_strategy;
  std::string source;
  std::optional<MeasurementRecord> measurement;
  bool valid = true;
  double compile_time_ms = 0.0;
};

struct Config {
  int num_clusters = 3;
  double alpha = 0.5;
  int horizon = 10;
  int refresh_interval = 10;
  int buffer_capacity = 500;
  double learning_rate = 0.1;
  double l2_penalty = 1e-4;
  double reward_clip_floor = -1.0;
  std::uint64_t rng_seed = 0;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Builds a Config from key=value entries, filling unset fields with defaults.
// Throws ConfigError listing every violated constraint.
Config validate_config(const std::map<std::string, std::string>& entries);

// Flat key=value file, '#' starts a comment.
std::map<std::string, std::string> load_config_entries(const std::string& path);
Config load_config_file(const std::string& path);

// Relative latency improvement, -1 for invalid candidates, clipped below at
// clip_floor for valid ones. Result never exceeds 1.
double compute_reward(double prev_latency_ms, std::optional<double> new_latency_ms,
                      bool valid, double clip_floor = -1.0);

struct PullRecord {
  int round = 0;
  KernelId kernel_id = 0;
  StrategyId strategy_id = 0;
  int cluster_index = 0;
  double ucb_score = 0.0;  // +inf marks a forced-exploration pull
  double reward = 0.0;
  std::optional<KernelId> child_id;
  bool child_valid = false;
  std::optional<double> child_latency_ms;
};

// Pool of valid, measured kernels. Ids are issued by the caller and must be
// strictly increasing; gaps are fine (ids of invalid candidates never enter).
class CandidatePool {
 public:
  // Invalidates spans returned by members().
  KernelId add(KernelCandidate candidate);
  const KernelCandidate& at(KernelId id) const;
  bool contains(KernelId id) const;
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  std::span<const KernelCandidate> members() const { return members_; }

 private:
  std::vector<KernelCandidate> members_;  // ascending id
  std::map<KernelId, std::size_t> index_;
};

struct LineageStep {
  KernelId kernel_id = 0;
  std::optional<StrategyId> applied_strategy;
};

// Chain of strategy applications from the root kernel down to `id`.
std::vector<LineageStep> candidate_lineage(const CandidatePool& pool, KernelId id);

}  // namespace kb
