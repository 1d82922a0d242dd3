#include "kernelband/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kb {

namespace {

using nlohmann::json;

// Reward draws stay below this so latency keeps a positive floor.
constexpr double kMaxTrueReward = 0.99;

// Latency truth lives in log space; exp() of a long improvement chain can
// underflow, and reported latencies must stay positive.
constexpr double kMinLatencyMs = 1e-300;

double truncated_reward(double value) { return std::min(value, kMaxTrueReward); }

}  // namespace

void SimulatorSpec::validate() const {
  auto fail = [](const std::string& why) { throw std::invalid_argument("simulator spec: " + why); };

  const std::size_t num_archetypes = archetypes.size();
  const std::size_t num_strategies = strategies.size();
  if (num_archetypes == 0) fail("at least one archetype required");
  if (num_strategies == 0) fail("at least one strategy required");
  for (std::size_t s = 0; s < num_strategies; ++s) {
    if (strategies[s].id != static_cast<StrategyId>(s)) fail("strategy ids must be 0..|S|-1");
  }
  if (mean_reward.size() != num_archetypes) fail("mean_reward must have one row per archetype");
  if (reward_std.size() != num_archetypes) fail("reward_std must have one row per archetype");
  for (std::size_t i = 0; i < num_archetypes; ++i) {
    if (mean_reward[i].size() != num_strategies) fail("mean_reward row size must be |S|");
    if (reward_std[i].size() != num_strategies) fail("reward_std row size must be |S|");
    for (std::size_t s = 0; s < num_strategies; ++s) {
      if (mean_reward[i][s] < -1.0 || mean_reward[i][s] > 1.0) fail("mean_reward must be in [-1, 1]");
      if (reward_std[i][s] < 0.0) fail("reward_std must be >= 0");
    }
  }
  if (failure_prob.size() != num_strategies) fail("failure_prob must have one entry per strategy");
  for (double p : failure_prob) {
    if (p < 0.0 || p > 1.0) fail("failure_prob must be in [0, 1]");
  }
  for (const auto& arch : archetypes) {
    if (arch.mem_footprint_mean <= 0.0) fail("mem_footprint_mean must be positive");
    if (arch.mem_footprint_std < 0.0) fail("mem_footprint_std must be >= 0");
    if (arch.arithmetic_intensity_mean < 0.0) fail("arithmetic_intensity_mean must be >= 0");
    if (arch.arithmetic_intensity_std < 0.0) fail("arithmetic_intensity_std must be >= 0");
    if (arch.block_dim_x < 1 || arch.block_dim_y < 1) fail("block dims must be positive");
    if (arch.block_dim_std < 0.0) fail("block_dim_std must be >= 0");
    if (arch.initial_latency_ms <= 0.0) fail("initial_latency_ms must be positive");
    for (std::size_t c = 0; c < kProfilingDims; ++c) {
      if (arch.counter_mean[c] < 0.0) fail("counter means must be >= 0");
      if (arch.counter_std[c] < 0.0) fail("counter stds must be >= 0");
    }
  }
  if (seeded_archetypes().empty()) fail("at least one archetype must be seeded");
  if (cluster_epsilon < 0.0) fail("cluster_epsilon must be >= 0");
  if (measurement_noise_std < 0.0) fail("measurement_noise_std must be >= 0");
  if (timing_repetitions < 1) fail("timing_repetitions must be >= 1");
  if (timing_warmups < 0) fail("timing_warmups must be >= 0");
  if (compile_time_min_ms <= 0.0 || compile_time_max_ms < compile_time_min_ms) {
    fail("compile time range must satisfy 0 < min <= max");
  }
  if (archetype_mutation_prob < 0.0 || archetype_mutation_prob > 1.0) {
    fail("archetype_mutation_prob must be in [0, 1]");
  }
}

std::vector<int> SimulatorSpec::seeded_archetypes() const {
  std::vector<int> seeded;
  for (std::size_t i = 0; i < archetypes.size(); ++i) {
    if (archetypes[i].seeded) seeded.push_back(static_cast<int>(i));
  }
  return seeded;
}

double SimulatorSpec::arm_mean(int archetype, StrategyId s) const {
  const double f = failure_prob[s];
  return (1.0 - f) * truncated_reward(mean_reward[archetype][s]) - f;
}

double SimulatorSpec::optimal_mean_reward() const {
  std::vector<int> reachable = seeded_archetypes();
  if (archetype_mutation_prob > 0.0) {
    reachable.resize(archetypes.size());
    for (std::size_t i = 0; i < reachable.size(); ++i) reachable[i] = static_cast<int>(i);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (int i : reachable) {
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      best = std::max(best, arm_mean(i, static_cast<StrategyId>(s)));
    }
  }
  return best;
}

bool archetype_separation_check(const SimulatorSpec& spec) {
  // Template-driven runtime dimensions as (mean, std) pairs; footprint goes
  // through the log transform via the delta approximation std/mean.
  auto dims = [](const ArchetypeTemplate& a) {
    return std::array<std::pair<double, double>, 5>{{
        {std::log(a.mem_footprint_mean), a.mem_footprint_std / a.mem_footprint_mean},
        {a.arithmetic_intensity_mean, a.arithmetic_intensity_std},
        {static_cast<double>(a.block_dim_x), a.block_dim_std},
        {static_cast<double>(a.block_dim_y), a.block_dim_std},
        {a.counter_mean[kAchievedOccupancy], a.counter_std[kAchievedOccupancy]},
    }};
  };
  for (std::size_t a = 0; a < spec.archetypes.size(); ++a) {
    for (std::size_t b = a + 1; b < spec.archetypes.size(); ++b) {
      const auto da = dims(spec.archetypes[a]);
      const auto db = dims(spec.archetypes[b]);
      bool separated = false;
      for (std::size_t d = 0; d < da.size() && !separated; ++d) {
        const double gap = std::abs(da[d].first - db[d].first);
        const double spread = std::max(da[d].second, db[d].second);
        if (gap > 0.0 && gap >= 10.0 * spread) separated = true;
      }
      if (!separated) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

namespace {

std::vector<double> broadcast_per_strategy(const json& j, std::size_t n, const char* key) {
  if (j.is_number()) return std::vector<double>(n, j.get<double>());
  if (j.is_array()) {
    auto v = j.get<std::vector<double>>();
    if (v.size() != n) {
      throw std::invalid_argument(std::string("simulator spec: ") + key + " size mismatch");
    }
    return v;
  }
  throw std::invalid_argument(std::string("simulator spec: ") + key + " must be number or array");
}

std::vector<std::vector<double>> broadcast_matrix(const json& j, std::size_t rows,
                                                  std::size_t cols, const char* key) {
  if (j.is_number()) {
    return std::vector<std::vector<double>>(rows, std::vector<double>(cols, j.get<double>()));
  }
  auto m = j.get<std::vector<std::vector<double>>>();
  if (m.size() != rows) {
    throw std::invalid_argument(std::string("simulator spec: ") + key + " row count mismatch");
  }
  for (const auto& row : m) {
    if (row.size() != cols) {
      throw std::invalid_argument(std::string("simulator spec: ") + key + " column count mismatch");
    }
  }
  return m;
}

}  // namespace

SimulatorSpec parse_simulator_spec(const std::string& json_text) {
  json j = json::parse(json_text);
  SimulatorSpec spec;

  StrategyId sid = 0;
  for (const auto& js : j.at("strategies")) {
    Strategy s;
    s.id = sid++;
    s.name = js.at("name").get<std::string>();
    s.description = js.value("description", s.name);
    spec.strategies.push_back(std::move(s));
  }

  for (const auto& ja : j.at("archetypes")) {
    ArchetypeTemplate a;
    a.name = ja.value("name", "");
    auto mean = ja.at("counter_mean").get<std::vector<double>>();
    auto std_dev = ja.value("counter_std", std::vector<double>(kProfilingDims, 0.0));
    if (mean.size() != kProfilingDims || std_dev.size() != kProfilingDims) {
      throw std::invalid_argument("simulator spec: counter vectors must have 9 entries");
    }
    std::copy(mean.begin(), mean.end(), a.counter_mean.begin());
    std::copy(std_dev.begin(), std_dev.end(), a.counter_std.begin());
    a.mem_footprint_mean = ja.at("mem_footprint_mean").get<double>();
    a.mem_footprint_std = ja.value("mem_footprint_std", 0.0);
    a.arithmetic_intensity_mean = ja.at("arithmetic_intensity_mean").get<double>();
    a.arithmetic_intensity_std = ja.value("arithmetic_intensity_std", 0.0);
    a.block_dim_x = ja.at("block_dim_x").get<int>();
    a.block_dim_y = ja.at("block_dim_y").get<int>();
    a.block_dim_std = ja.value("block_dim_std", 0.0);
    a.initial_latency_ms = ja.at("initial_latency_ms").get<double>();
    a.seeded = ja.value("seeded", true);
    spec.archetypes.push_back(std::move(a));
  }

  const std::size_t num_archetypes = spec.archetypes.size();
  const std::size_t num_strategies = spec.strategies.size();
  spec.mean_reward = broadcast_matrix(j.at("mean_reward"), num_archetypes, num_strategies,
                                      "mean_reward");
  spec.reward_std = broadcast_matrix(j.value("reward_std", json(0.0)), num_archetypes,
                                     num_strategies, "reward_std");
  spec.failure_prob =
      broadcast_per_strategy(j.value("failure_prob", json(0.0)), num_strategies, "failure_prob");
  spec.cluster_epsilon = j.value("cluster_epsilon", 0.0);
  spec.measurement_noise_std = j.value("measurement_noise_std", 0.0);
  spec.timing_repetitions = j.value("timing_repetitions", 1000);
  spec.timing_warmups = j.value("timing_warmups", 100);
  if (j.contains("compile_time_ms")) {
    auto range = j.at("compile_time_ms").get<std::vector<double>>();
    if (range.size() != 2) {
      throw std::invalid_argument("simulator spec: compile_time_ms must be [min, max]");
    }
    spec.compile_time_min_ms = range[0];
    spec.compile_time_max_ms = range[1];
  }
  spec.archetype_mutation_prob = j.value("archetype_mutation_prob", 0.0);

  spec.validate();
  return spec;
}

SimulatorSpec load_simulator_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open simulator spec: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_simulator_spec(buf.str());
}

void save_simulator_spec(const SimulatorSpec& spec, const std::string& path) {
  json j;
  for (const auto& s : spec.strategies) {
    j["strategies"].push_back({{"name", s.name}, {"description", s.description}});
  }
  for (const auto& a : spec.archetypes) {
    json ja;
    ja["name"] = a.name;
    ja["counter_mean"] = std::vector<double>(a.counter_mean.begin(), a.counter_mean.end());
    ja["counter_std"] = std::vector<double>(a.counter_std.begin(), a.counter_std.end());
    ja["mem_footprint_mean"] = a.mem_footprint_mean;
    ja["mem_footprint_std"] = a.mem_footprint_std;
    ja["arithmetic_intensity_mean"] = a.arithmetic_intensity_mean;
    ja["arithmetic_intensity_std"] = a.arithmetic_intensity_std;
    ja["block_dim_x"] = a.block_dim_x;
    ja["block_dim_y"] = a.block_dim_y;
    ja["block_dim_std"] = a.block_dim_std;
    ja["initial_latency_ms"] = a.initial_latency_ms;
    ja["seeded"] = a.seeded;
    j["archetypes"].push_back(std::move(ja));
  }
  j["mean_reward"] = spec.mean_reward;
  j["reward_std"] = spec.reward_std;
  j["failure_prob"] = spec.failure_prob;
  j["cluster_epsilon"] = spec.cluster_epsilon;
  j["measurement_noise_std"] = spec.measurement_noise_std;
  j["timing_repetitions"] = spec.timing_repetitions;
  j["timing_warmups"] = spec.timing_warmups;
  j["compile_time_ms"] = {spec.compile_time_min_ms, spec.compile_time_max_ms};
  j["archetype_mutation_prob"] = spec.archetype_mutation_prob;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write simulator spec: " + path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// SimulatorEnvironment
// ---------------------------------------------------------------------------

SimulatorEnvironment::SimulatorEnvironment(SimulatorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

std::vector<double> SimulatorEnvironment::draw_offsets(std::mt19937_64& rng) {
  std::vector<double> offsets(spec_.strategies.size(), 0.0);
  if (spec_.cluster_epsilon > 0.0) {
    std::uniform_real_distribution<double> dist(-spec_.cluster_epsilon, 0.0);
    for (double& o : offsets) o = dist(rng);
  }
  return offsets;
}

std::array<double, kProfilingDims> SimulatorEnvironment::draw_counters(int archetype,
                                                                       std::mt19937_64& rng) {
  const ArchetypeTemplate& tmpl = spec_.archetypes[archetype];
  std::array<double, kProfilingDims> counters{};
  for (std::size_t c = 0; c < kProfilingDims; ++c) {
    double v = tmpl.counter_mean[c];
    if (tmpl.counter_std[c] > 0.0) {
      std::normal_distribution<double> dist(tmpl.counter_mean[c], tmpl.counter_std[c]);
      v = dist(rng);
    }
    counters[c] = std::max(v, 0.0);
  }
  return counters;
}

double SimulatorEnvironment::draw_compile_time(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(spec_.compile_time_min_ms,
                                              spec_.compile_time_max_ms);
  return dist(rng);
}

MeasurementRecord SimulatorEnvironment::measure(const KernelTruth& truth,
                                                std::mt19937_64& rng) {
  const ArchetypeTemplate& tmpl = spec_.archetypes[truth.archetype];
  MeasurementRecord m;

  const double true_latency = std::max(std::exp(truth.log_latency), kMinLatencyMs);
  if (spec_.measurement_noise_std > 0.0) {
    std::normal_distribution<double> rel(0.0, spec_.measurement_noise_std);
    for (int w = 0; w < spec_.timing_warmups; ++w) rel(rng);
    double total = 0.0;
    for (int r = 0; r < spec_.timing_repetitions; ++r) {
      total += std::max(true_latency * (1.0 + rel(rng)), true_latency * 1e-9);
    }
    m.latency_ms = total / static_cast<double>(spec_.timing_repetitions);
  } else {
    m.latency_ms = true_latency;
  }

  auto draw = [&](double mean, double std_dev, double floor) {
    if (std_dev <= 0.0) return std::max(mean, floor);
    std::normal_distribution<double> dist(mean, std_dev);
    return std::max(dist(rng), floor);
  };
  m.mem_footprint_bytes = draw(tmpl.mem_footprint_mean, tmpl.mem_footprint_std, 1.0);
  m.arithmetic_intensity = draw(tmpl.arithmetic_intensity_mean, tmpl.arithmetic_intensity_std, 0.0);
  m.block_dim_x = std::max(1, static_cast<int>(std::lround(
                                  draw(tmpl.block_dim_x, tmpl.block_dim_std, 1.0))));
  m.block_dim_y = std::max(1, static_cast<int>(std::lround(
                                  draw(tmpl.block_dim_y, tmpl.block_dim_std, 1.0))));
  m.counters = draw_counters(truth.archetype, rng);
  m.correctness_passed = true;
  return m;
}

std::vector<KernelCandidate> SimulatorEnvironment::seed_kernels(std::mt19937_64& rng) {
  std::vector<KernelCandidate> seeds;
  KernelId id = 0;
  for (int archetype : spec_.seeded_archetypes()) {
    KernelTruth truth;
    truth.archetype = archetype;
    truth.log_latency = std::log(spec_.archetypes[archetype].initial_latency_ms);
    truth.strategy_offset.assign(spec_.strategies.size(), 0.0);

    KernelCandidate seed;
    seed.id = id++;
    seed.source = "sim:seed:" + std::to_string(archetype);
    seed.measurement = measure(truth, rng);
    seed.compile_time_ms = draw_compile_time(rng);
    seed.valid = true;
    truths_[seed.source] = std::move(truth);
    seeds.push_back(std::move(seed));
  }
  return seeds;
}

TransformOutcome SimulatorEnvironment::transform(const KernelCandidate& parent,
                                                 const Strategy& strategy,
                                                 std::mt19937_64& rng) {
  auto it = truths_.find(parent.source);
  if (it == truths_.end()) {
    throw std::invalid_argument("simulator: unknown parent kernel");
  }
  const KernelTruth& parent_truth = it->second;

  const double failure = spec_.failure_prob[strategy.id];
  if (failure > 0.0) {
    std::bernoulli_distribution fails(failure);
    if (fails(rng)) return TransformOutcome::compile_failure();
  }

  const double mean = truncated_reward(spec_.mean_reward[parent_truth.archetype][strategy.id] +
                                       parent_truth.strategy_offset[strategy.id]);
  double r_true = mean;
  const double sigma = spec_.reward_std[parent_truth.archetype][strategy.id];
  if (sigma > 0.0) {
    std::normal_distribution<double> dist(mean, sigma);
    r_true = truncated_reward(dist(rng));
  }

  KernelTruth child;
  child.archetype = parent_truth.archetype;
  if (spec_.archetype_mutation_prob > 0.0) {
    std::bernoulli_distribution mutates(spec_.archetype_mutation_prob);
    if (mutates(rng)) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(spec_.archetypes.size()) - 1);
      child.archetype = pick(rng);
    }
  }
  child.log_latency = parent_truth.log_latency + std::log1p(-r_true);
  child.strategy_offset = draw_offsets(rng);

  std::string token = "sim:k" + std::to_string(next_token_++);
  truths_[token] = std::move(child);
  return TransformOutcome::success(std::move(token));
}

Evaluation SimulatorEnvironment::evaluate(const std::string& source, std::mt19937_64& rng) {
  auto it = truths_.find(source);
  if (it == truths_.end()) {
    throw std::invalid_argument("simulator: evaluate called on unknown source");
  }
  Evaluation eval;
  eval.valid = true;
  eval.measurement = measure(it->second, rng);
  eval.compile_time_ms = draw_compile_time(rng);
  return eval;
}

std::vector<std::vector<LabeledSample>> SimulatorEnvironment::pretraining_pairs(
    int per_strategy, std::mt19937_64& rng) {
  if (per_strategy <= 0) return {};
  const std::vector<int> seeded = spec_.seeded_archetypes();
  std::uniform_int_distribution<std::size_t> pick(0, seeded.size() - 1);

  struct RawSample {
    std::array<double, kProfilingDims> counters{};
    int label = 0;
  };
  std::vector<std::vector<RawSample>> raw(spec_.strategies.size());

  CounterRanges ranges;
  for (auto& range : ranges) {
    range = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  }

  for (std::size_t s = 0; s < spec_.strategies.size(); ++s) {
    raw[s].reserve(per_strategy);
    for (int i = 0; i < per_strategy; ++i) {
      const int archetype = seeded[pick(rng)];
      RawSample sample;
      sample.counters = draw_counters(archetype, rng);

      double offset = 0.0;
      if (spec_.cluster_epsilon > 0.0) {
        std::uniform_real_distribution<double> dist(-spec_.cluster_epsilon, 0.0);
        offset = dist(rng);
      }
      double reward = -1.0;
      bool failed = false;
      if (spec_.failure_prob[s] > 0.0) {
        std::bernoulli_distribution fails(spec_.failure_prob[s]);
        failed = fails(rng);
      }
      if (!failed) {
        const double mean = truncated_reward(spec_.mean_reward[archetype][s] + offset);
        reward = mean;
        if (spec_.reward_std[archetype][s] > 0.0) {
          std::normal_distribution<double> dist(mean, spec_.reward_std[archetype][s]);
          reward = truncated_reward(dist(rng));
        }
      }
      sample.label = reward > 0.0 ? 1 : 0;

      for (std::size_t c = 0; c < kProfilingDims; ++c) {
        ranges[c].min = std::min(ranges[c].min, sample.counters[c]);
        ranges[c].max = std::max(ranges[c].max, sample.counters[c]);
      }
      raw[s].push_back(std::move(sample));
    }
  }

  std::vector<std::vector<LabeledSample>> pairs(raw.size());
  for (std::size_t s = 0; s < raw.size(); ++s) {
    pairs[s].reserve(raw[s].size());
    for (const RawSample& sample : raw[s]) {
      pairs[s].push_back({profiling_feature_vector(sample.counters, ranges), sample.label});
    }
  }
  return pairs;
}

int SimulatorEnvironment::archetype_of(const std::string& source) const {
  return truths_.at(source).archetype;
}

}  // namespace kb
