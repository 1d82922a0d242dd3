#pragma once

#include <map>
#include <random>
#include <span>
#include <vector>

#include "kernelband/core.hpp"

namespace kb {

// Runtime-behavior feature vector, fixed order:
// [log latency, log memory footprint, arithmetic intensity,
//  block_dim_x, block_dim_y, achieved occupancy]
using RuntimeVec = std::array<double, kRuntimeDims>;

RuntimeVec runtime_feature_vector(const MeasurementRecord& m);

// Per-dimension population z-scoring; dimensions where every input is equal
// map to 0 so single-kernel pools stay well-defined.
std::vector<RuntimeVec> zscore_normalize(std::span<const RuntimeVec> vectors);

// k-means++ seeding on a uniform random subsample of max(ceil(0.1*N), k)
// points; first centroid uniform, the rest D^2-weighted. Returns min(N, k)
// centroids.
std::vector<RuntimeVec> seed_centroids_kmeanspp(std::span<const RuntimeVec> points,
                                                int k, std::mt19937_64& rng);

struct LloydResult {
  std::vector<int> assignment;
  std::vector<RuntimeVec> centroids;
};

// Alternates nearest-centroid assignment and mean updates until assignments
// stop changing (cap 100 iterations). Empty clusters are reseeded to the
// point farthest from its current centroid.
LloydResult lloyd_iterate(std::span<const RuntimeVec> points,
                          std::vector<RuntimeVec> centroids);

bool refresh_due(int t, int last_refresh_round, std::size_t pool_size,
                 std::size_t pool_size_at_refresh, int refresh_interval);

// Maps each new centroid to a stable label: the injective matching with
// minimal summed distance over all enumerable permutations; surplus new
// centroids receive fresh labels.
std::vector<int> match_centroid_labels(std::span<const RuntimeVec> old_centroids,
                                       std::span<const RuntimeVec> new_centroids);

// Nearest centroid by Euclidean distance, ties broken by lowest index.
int assign(const RuntimeVec& point, std::span<const RuntimeVec> centroids);

double squared_distance(const RuntimeVec& a, const RuntimeVec& b);
double wcss(std::span<const RuntimeVec> points, std::span<const int> assignment,
            std::span<const RuntimeVec> centroids);

struct ClusterModel {
  std::vector<RuntimeVec> centroids;  // index == stable cluster label
  std::map<KernelId, int> assignment;
  int last_refresh_round = 0;
  std::size_t pool_size_at_refresh = 0;

  int num_clusters() const { return static_cast<int>(centroids.size()); }
  int cluster_of(KernelId id) const { return assignment.at(id); }
};

// Full refresh: restarted k-means++ seeding plus Lloyd iteration, keeping the
// lowest-WCSS run, then relabeling so existing cluster statistics stay
// attached to the centroids they described.
void refresh_clusters(ClusterModel& model, std::span<const KernelId> ids,
                      std::span<const RuntimeVec> points, int max_clusters,
                      int round, std::mt19937_64& rng);

// Incremental path between refreshes: a new kernel joins the nearest centroid.
void assign_new_kernel(ClusterModel& model, KernelId id, const RuntimeVec& point);

}  // namespace kb
