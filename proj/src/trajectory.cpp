#include "kernelband/trajectory.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace kb {

namespace {

constexpr const char* kMagic = "# kernelband-trajectory v1";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str()) throw std::runtime_error("trajectory: bad number '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) fields.push_back(field);
  return fields;
}

}  // namespace

void export_trajectory(const TrajectoryData& data, std::ostream& out, std::string_view format) {
  char delim = 0;
  if (format == "tsv") {
    delim = '\t';
  } else if (format == "csv") {
    delim = ',';
  } else {
    throw std::invalid_argument("unsupported trajectory format: " + std::string(format));
  }

  out << kMagic << '\n';
  out << "# seed " << data.seed << '\n';
  out << "# best_kernel_id " << data.best_kernel_id << '\n';
  out << "# best_latency_ms " << fmt(data.best_latency_ms) << '\n';
  out << "# initial_best_latency_ms " << fmt(data.initial_best_latency_ms) << '\n';
  out << "# pool_size " << data.pool_size << '\n';

  const char* columns[] = {"round",    "kernel_id",  "strategy_id",     "cluster",
                           "ucb_score", "reward",     "child_id",        "child_valid",
                           "child_latency_ms"};
  for (std::size_t i = 0; i < std::size(columns); ++i) {
    if (i > 0) out << delim;
    out << columns[i];
  }
  out << '\n';

  for (const PullRecord& pull : data.trajectory) {
    out << pull.round << delim << pull.kernel_id << delim << pull.strategy_id << delim
        << pull.cluster_index << delim << fmt(pull.ucb_score) << delim << fmt(pull.reward)
        << delim;
    if (pull.child_id.has_value()) {
      out << *pull.child_id;
    } else {
      out << '-';
    }
    out << delim << (pull.child_valid ? 1 : 0) << delim;
    if (pull.child_latency_ms.has_value()) {
      out << fmt(*pull.child_latency_ms);
    } else {
      out << '-';
    }
    out << '\n';
  }
}

void export_trajectory(const TrajectoryData& data, const std::string& path,
                       std::string_view format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path);
  export_trajectory(data, out, format);
}

TrajectoryData load_trajectory(std::istream& in) {
  TrajectoryData data;
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw std::runtime_error("trajectory: missing header");
  }

  char delim = '\t';
  bool have_columns = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string key;
      meta >> key;
      std::string value;
      std::getline(meta, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      if (key == "seed") {
        data.seed = std::stoull(value);
      } else if (key == "best_kernel_id") {
        data.best_kernel_id = std::stoll(value);
      } else if (key == "best_latency_ms") {
        data.best_latency_ms = parse_double(value);
      } else if (key == "initial_best_latency_ms") {
        data.initial_best_latency_ms = parse_double(value);
      } else if (key == "pool_size") {
        data.pool_size = std::stoull(value);
      }
      continue;
    }
    if (!have_columns) {
      // Column header row; sniff the delimiter.
      delim = line.find(',') != std::string::npos ? ',' : '\t';
      have_columns = true;
      continue;
    }
    auto fields = split(line, delim);
    if (fields.size() != 9) throw std::runtime_error("trajectory: expected 9 fields");
    PullRecord pull;
    pull.round = std::stoi(fields[0]);
    pull.kernel_id = std::stoll(fields[1]);
    pull.strategy_id = std::stoi(fields[2]);
    pull.cluster_index = std::stoi(fields[3]);
    pull.ucb_score = parse_double(fields[4]);
    pull.reward = parse_double(fields[5]);
    if (fields[6] != "-") pull.child_id = std::stoll(fields[6]);
    pull.child_valid = fields[7] == "1";
    if (fields[8] != "-") pull.child_latency_ms = parse_double(fields[8]);
    data.trajectory.push_back(pull);
  }
  return data;
}

TrajectoryData load_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trajectory: " + path);
  return load_trajectory(in);
}

}  // namespace kb
