#include "kernelband/core.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace kb {

const std::array<const char*, kProfilingDims> kCounterNames = {
    "l2_hit",           "mem_bw",         "sm_util",
    "warp_eff",         "achieved_occupancy", "reg_per_thread",
    "shared_conflicts", "load_store_coalesced", "tensor_core_util",
};

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
  std::string out = "invalid config:";
  for (const auto& v : violations) {
    out += "\n  - " + v;
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

Config validate_config(const std::map<std::string, std::string>& entries) {
  Config cfg;
  std::vector<std::string> violations;

  auto parse_int = [&](const std::string& key, const std::string& text, auto& out) {
    try {
      out = static_cast<std::remove_reference_t<decltype(out)>>(std::stoll(text));
    } catch (const std::exception&) {
      violations.push_back(key + " is not an integer: '" + text + "'");
    }
  };
  auto parse_real = [&](const std::string& key, const std::string& text, double& out) {
    try {
      std::size_t pos = 0;
      out = std::stod(text, &pos);
      if (pos != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      violations.push_back(key + " is not a number: '" + text + "'");
    }
  };

  for (const auto& [key, value] : entries) {
    if (key == "num_clusters") {
      parse_int(key, value, cfg.num_clusters);
    } else if (key == "alpha") {
      parse_real(key, value, cfg.alpha);
    } else if (key == "horizon") {
      parse_int(key, value, cfg.horizon);
    } else if (key == "refresh_interval") {
      parse_int(key, value, cfg.refresh_interval);
    } else if (key == "buffer_capacity") {
      parse_int(key, value, cfg.buffer_capacity);
    } else if (key == "learning_rate") {
      parse_real(key, value, cfg.learning_rate);
    } else if (key == "l2_penalty") {
      parse_real(key, value, cfg.l2_penalty);
    } else if (key == "reward_clip_floor") {
      parse_real(key, value, cfg.reward_clip_floor);
    } else if (key == "rng_seed") {
      parse_int(key, value, cfg.rng_seed);
    } else {
      violations.push_back("unknown key '" + key + "'");
    }
  }

  if (cfg.num_clusters < 1) violations.push_back("num_clusters must be >= 1");
  if (cfg.alpha < 0.0) violations.push_back("alpha must be >= 0");
  if (cfg.horizon < 0) violations.push_back("horizon must be >= 0");
  if (cfg.refresh_interval < 1) violations.push_back("refresh_interval must be >= 1");
  if (cfg.buffer_capacity < 1) violations.push_back("buffer_capacity must be >= 1");
  if (cfg.learning_rate <= 0.0) violations.push_back("learning_rate must be > 0");
  if (cfg.l2_penalty < 0.0) violations.push_back("l2_penalty must be >= 0");
  if (cfg.reward_clip_floor > 1.0) violations.push_back("reward_clip_floor must be <= 1");

  if (!violations.empty()) throw ConfigError(std::move(violations));
  return cfg;
}

std::map<std::string, std::string> load_config_entries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto strip = [](std::string s) {
      auto not_space = [](unsigned char c) { return !std::isspace(c); };
      s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
      s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
      return s;
    };
    std::string stripped = strip(line);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    entries[strip(stripped.substr(0, eq))] = strip(stripped.substr(eq + 1));
  }
  return entries;
}

Config load_config_file(const std::string& path) {
  return validate_config(load_config_entries(path));
}

double compute_reward(double prev_latency_ms, std::optional<double> new_latency_ms,
                      bool valid, double clip_floor) {
  if (prev_latency_ms <= 0.0) {
    throw std::domain_error("compute_reward: previous latency must be positive");
  }
  if (valid != new_latency_ms.has_value()) {
    throw std::invalid_argument("compute_reward: new latency must be present iff valid");
  }
  if (!valid) return -1.0;
  if (*new_latency_ms <= 0.0) {
    throw std::domain_error("compute_reward: new latency must be positive");
  }
  double raw = 1.0 - *new_latency_ms / prev_latency_ms;
  return std::max(clip_floor, raw);
}

KernelId CandidatePool::add(KernelCandidate candidate) {
  if (!candidate.valid) {
    throw std::invalid_argument("pool: invalid candidates never enter the pool");
  }
  if (!candidate.measurement.has_value()) {
    throw std::invalid_argument("pool: pooled kernels must carry a measurement");
  }
  if (!members_.empty() && candidate.id <= members_.back().id) {
    throw std::invalid_argument("pool: ids must be strictly increasing");
  }
  if (candidate.parent_id.has_value()) {
    if (!contains(*candidate.parent_id) || *candidate.parent_id >= candidate.id) {
      throw std::invalid_argument("pool: parent must exist and have a smaller id");
    }
  }
  index_.emplace(candidate.id, members_.size());
  members_.push_back(std::move(candidate));
  return members_.back().id;
}

const KernelCandidate& CandidatePool::at(KernelId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw std::invalid_argument("pool: unknown kernel id " + std::to_string(id));
  }
  return members_[it->second];
}

bool CandidatePool::contains(KernelId id) const { return index_.count(id) != 0; }

std::vector<LineageStep> candidate_lineage(const CandidatePool& pool, KernelId id) {
  std::vector<LineageStep> chain;
  const KernelCandidate* cur = &pool.at(id);
  while (true) {
    chain.push_back({cur->id, cur->applied_strategy});
    if (!cur->parent_id.has_value()) break;
    cur = &pool.at(*cur->parent_id);
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

}  // namespace kb
