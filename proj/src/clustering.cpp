#include "kernelband/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace kb {

namespace {

constexpr int kMaxLloydIterations = 100;

// A refresh keeps the best-WCSS result over several seeding+Lloyd runs. Small
// pools get k-point subsamples from the seeding rule, which miss a cluster
// entirely ~3 times out of 4, and Lloyd cannot escape the resulting
// merged-cluster minimum on well-separated data; extra restarts there are
// nearly free.
int refresh_restarts(std::size_t pool_size) { return pool_size <= 100 ? 20 : 5; }

}  // namespace

RuntimeVec runtime_feature_vector(const MeasurementRecord& m) {
  if (m.latency_ms <= 0.0) {
    throw std::domain_error("runtime features: latency must be positive");
  }
  if (m.mem_footprint_bytes <= 0.0) {
    throw std::domain_error("runtime features: memory footprint must be positive");
  }
  return {std::log(m.latency_ms),
          std::log(m.mem_footprint_bytes),
          m.arithmetic_intensity,
          static_cast<double>(m.block_dim_x),
          static_cast<double>(m.block_dim_y),
          m.counters[kAchievedOccupancy]};
}

std::vector<RuntimeVec> zscore_normalize(std::span<const RuntimeVec> vectors) {
  if (vectors.empty()) {
    throw std::invalid_argument("zscore_normalize: empty input");
  }
  const double n = static_cast<double>(vectors.size());
  std::vector<RuntimeVec> out(vectors.begin(), vectors.end());
  for (std::size_t d = 0; d < kRuntimeDims; ++d) {
    bool constant = true;
    for (const auto& v : vectors) {
      if (v[d] != vectors[0][d]) {
        constant = false;
        break;
      }
    }
    if (constant) {
      for (auto& v : out) v[d] = 0.0;
      continue;
    }
    double mean = 0.0;
    for (const auto& v : vectors) mean += v[d];
    mean /= n;
    double var = 0.0;
    for (const auto& v : vectors) var += (v[d] - mean) * (v[d] - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var);
    for (auto& v : out) v[d] = (v[d] - mean) * inv_std;
  }
  return out;
}

double squared_distance(const RuntimeVec& a, const RuntimeVec& b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < kRuntimeDims; ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

std::vector<RuntimeVec> seed_centroids_kmeanspp(std::span<const RuntimeVec> points,
                                                int k, std::mt19937_64& rng) {
  if (points.empty()) throw std::invalid_argument("kmeans++: no points");
  if (k < 1) throw std::invalid_argument("kmeans++: k must be >= 1");

  const std::size_t n = points.size();
  const std::size_t want =
      std::max(static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n))),
               static_cast<std::size_t>(k));
  const std::size_t m = std::min(want, n);

  std::vector<std::size_t> sample(n);
  std::iota(sample.begin(), sample.end(), 0);
  if (m < n) {
    // Partial Fisher-Yates: the first m entries form a uniform subsample.
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(sample[i], sample[pick(rng)]);
    }
    sample.resize(m);
  }

  std::vector<RuntimeVec> centroids;
  std::vector<bool> chosen(m, false);
  std::vector<double> min_dist(m, std::numeric_limits<double>::infinity());

  std::uniform_int_distribution<std::size_t> first(0, m - 1);
  std::size_t pick = first(rng);
  chosen[pick] = true;
  centroids.push_back(points[sample[pick]]);

  while (centroids.size() < static_cast<std::size_t>(k) && centroids.size() < m) {
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      min_dist[i] = std::min(min_dist[i], squared_distance(points[sample[i]], centroids.back()));
      total += min_dist[i];
    }
    std::size_t next = m;
    if (total > 0.0) {
      std::discrete_distribution<std::size_t> weighted(min_dist.begin(), min_dist.end());
      next = weighted(rng);
    } else {
      // All remaining points coincide with chosen centroids; fall back to a
      // uniform pick among the unchosen ones.
      std::vector<std::size_t> open;
      for (std::size_t i = 0; i < m; ++i) {
        if (!chosen[i]) open.push_back(i);
      }
      if (open.empty()) break;
      std::uniform_int_distribution<std::size_t> uniform(0, open.size() - 1);
      next = open[uniform(rng)];
    }
    chosen[next] = true;
    centroids.push_back(points[sample[next]]);
  }
  return centroids;
}

int assign(const RuntimeVec& point, std::span<const RuntimeVec> centroids) {
  if (centroids.empty()) throw std::invalid_argument("assign: no centroids");
  int best = 0;
  double best_dist = squared_distance(point, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = squared_distance(point, centroids[c]);
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double wcss(std::span<const RuntimeVec> points, std::span<const int> assignment,
            std::span<const RuntimeVec> centroids) {
  double acc = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    acc += squared_distance(points[i], centroids[assignment[i]]);
  }
  return acc;
}

LloydResult lloyd_iterate(std::span<const RuntimeVec> points,
                          std::vector<RuntimeVec> centroids) {
  if (centroids.empty()) throw std::invalid_argument("lloyd: no centroids");
  const std::size_t n = points.size();
  const std::size_t k = centroids.size();

  std::vector<int> assignment(n, -1);
  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    std::vector<int> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = assign(points[i], centroids);
    if (next == assignment) break;
    assignment = std::move(next);

    std::vector<RuntimeVec> sums(k, RuntimeVec{});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = assignment[i];
      ++counts[c];
      for (std::size_t d = 0; d < kRuntimeDims; ++d) sums[c][d] += points[i][d];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t d = 0; d < kRuntimeDims; ++d) {
          centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
        continue;
      }
      // Reseed an empty cluster to the point farthest from its own centroid.
      std::size_t far = 0;
      double far_dist = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const double d = squared_distance(points[i], centroids[assignment[i]]);
        if (d > far_dist) {
          far_dist = d;
          far = i;
        }
      }
      centroids[c] = points[far];
      taken[far] = true;
    }
  }
  // Assignment may be stale if the loop hit the iteration cap right after a
  // centroid update.
  for (std::size_t i = 0; i < n; ++i) assignment[i] = assign(points[i], centroids);
  return {std::move(assignment), std::move(centroids)};
}

bool refresh_due(int t, int last_refresh_round, std::size_t pool_size,
                 std::size_t pool_size_at_refresh, int refresh_interval) {
  if (t - last_refresh_round >= refresh_interval) return true;
  return pool_size >= 2 * pool_size_at_refresh;
}

std::vector<int> match_centroid_labels(std::span<const RuntimeVec> old_centroids,
                                       std::span<const RuntimeVec> new_centroids) {
  const std::size_t n_old = old_centroids.size();
  const std::size_t n_new = new_centroids.size();
  std::vector<int> labels(n_new, -1);
  if (n_new == 0) return labels;
  if (n_old == 0) {
    for (std::size_t j = 0; j < n_new; ++j) labels[j] = static_cast<int>(j);
    return labels;
  }

  const std::size_t matched = std::min(n_old, n_new);
  // Enumerate permutations of the larger side; the first `matched` slots pair
  // old label i with new centroid perm[i] (or vice versa).
  const bool more_new = n_new >= n_old;
  const std::size_t perm_size = more_new ? n_new : n_old;
  std::vector<std::size_t> perm(perm_size);
  std::iota(perm.begin(), perm.end(), 0);

  std::vector<std::size_t> best_perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < matched; ++i) {
      cost += more_new ? squared_distance(old_centroids[i], new_centroids[perm[i]])
                       : squared_distance(old_centroids[perm[i]], new_centroids[i]);
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_perm.assign(perm.begin(), perm.end());
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  if (more_new) {
    for (std::size_t i = 0; i < matched; ++i) labels[best_perm[i]] = static_cast<int>(i);
    int fresh = static_cast<int>(n_old);
    for (std::size_t j = 0; j < n_new; ++j) {
      if (labels[j] < 0) labels[j] = fresh++;
    }
  } else {
    for (std::size_t i = 0; i < matched; ++i) labels[i] = static_cast<int>(best_perm[i]);
  }
  return labels;
}

void refresh_clusters(ClusterModel& model, std::span<const KernelId> ids,
                      std::span<const RuntimeVec> points, int max_clusters,
                      int round, std::mt19937_64& rng) {
  if (ids.size() != points.size()) {
    throw std::invalid_argument("refresh: ids/points size mismatch");
  }
  if (points.empty()) throw std::invalid_argument("refresh: empty pool");

  const int k = std::min<int>(max_clusters, static_cast<int>(points.size()));
  LloydResult best;
  double best_wcss = std::numeric_limits<double>::infinity();
  const int restarts = refresh_restarts(points.size());
  for (int attempt = 0; attempt < restarts; ++attempt) {
    auto seeds = seed_centroids_kmeanspp(points, k, rng);
    LloydResult result = lloyd_iterate(points, std::move(seeds));
    const double w = wcss(points, result.assignment, result.centroids);
    if (w < best_wcss) {
      best_wcss = w;
      best = std::move(result);
    }
  }

  if (best.centroids.size() < model.centroids.size()) {
    throw std::logic_error("refresh: cluster count may not shrink");
  }
  const std::vector<int> labels = match_centroid_labels(model.centroids, best.centroids);

  std::vector<RuntimeVec> relabeled(best.centroids.size());
  for (std::size_t j = 0; j < best.centroids.size(); ++j) {
    relabeled[labels[j]] = best.centroids[j];
  }
  model.centroids = std::move(relabeled);
  model.assignment.clear();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    model.assignment[ids[i]] = labels[best.assignment[i]];
  }
  model.last_refresh_round = round;
  model.pool_size_at_refresh = points.size();
}

void assign_new_kernel(ClusterModel& model, KernelId id, const RuntimeVec& point) {
  model.assignment[id] = assign(point, model.centroids);
}

}  // namespace kb
