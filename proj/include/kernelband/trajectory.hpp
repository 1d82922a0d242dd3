#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kernelband/core.hpp"

namespace kb {

// What a trajectory export round-trips: the per-round records plus a summary
// block.
struct TrajectoryData {
  std::uint64_t seed = 0;
  KernelId best_kernel_id = 0;
  double best_latency_ms = 0.0;
  double initial_best_latency_ms = 0.0;
  std::uint64_t pool_size = 0;
  std::vector<PullRecord> trajectory;
};

// Formats: "tsv" and "csv". Doubles are written with 17 significant digits so
// loading reproduces every field exactly.
void export_trajectory(const TrajectoryData& data, std::ostream& out, std::string_view format);
void export_trajectory(const TrajectoryData& data, const std::string& path,
                       std::string_view format);

TrajectoryData load_trajectory(std::istream& in);
TrajectoryData load_trajectory(const std::string& path);

}  // namespace kb
