#include "kernelband/compatibility.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace kb {

CounterRanges counter_ranges(std::span<const KernelCandidate> pool) {
  if (pool.empty()) throw std::invalid_argument("counter_ranges: empty pool");
  CounterRanges ranges;
  for (std::size_t c = 0; c < kProfilingDims; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& k : pool) {
      const double v = k.measurement->counters[c];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    ranges[c] = {lo, hi};
  }
  return ranges;
}

ProfilingFeatures profiling_feature_vector(const std::array<double, kProfilingDims>& raw,
                                           const CounterRanges& ranges) {
  ProfilingFeatures phi{};
  for (std::size_t c = 0; c < kProfilingDims; ++c) {
    const auto& [lo, hi] = ranges[c];
    if (lo > hi) throw std::invalid_argument("profiling features: min > max");
    if (lo == hi) {
      phi[c] = 0.5;
    } else {
      phi[c] = std::clamp((raw[c] - lo) / (hi - lo), 0.0, 1.0);
    }
  }
  return phi;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double predict_compatibility(const LogisticModel& model, const ProfilingFeatures& phi) {
  double z = model.bias;
  for (std::size_t c = 0; c < kProfilingDims; ++c) z += model.weights[c] * phi[c];
  return sigmoid(z);
}

LogisticGradient logistic_loss_gradient(const LogisticModel& model,
                                        std::span<const LabeledSample> batch,
                                        double l2_penalty) {
  if (batch.empty()) throw std::invalid_argument("logistic gradient: empty batch");
  LogisticGradient grad;
  for (const auto& sample : batch) {
    const double err = predict_compatibility(model, sample.phi) - sample.label;
    for (std::size_t c = 0; c < kProfilingDims; ++c) grad.weights[c] += err * sample.phi[c];
    grad.bias += err;
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t c = 0; c < kProfilingDims; ++c) {
    grad.weights[c] = grad.weights[c] * inv_n + l2_penalty * model.weights[c];
  }
  grad.bias *= inv_n;
  return grad;
}

void sgd_epoch(LogisticModel& model, std::span<const LabeledSample> samples,
               double learning_rate, double l2_penalty, std::mt19937_64& rng) {
  if (samples.empty()) throw std::invalid_argument("sgd_epoch: empty sample set");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t idx : order) {
    const auto& sample = samples[idx];
    const double err = predict_compatibility(model, sample.phi) - sample.label;
    for (std::size_t c = 0; c < kProfilingDims; ++c) {
      model.weights[c] -= learning_rate * (err * sample.phi[c] + l2_penalty * model.weights[c]);
    }
    model.bias -= learning_rate * err;
  }
}

StrategyCompatibility::StrategyCompatibility(std::size_t buffer_capacity,
                                             double learning_rate, double l2_penalty)
    : capacity_(buffer_capacity), learning_rate_(learning_rate), l2_penalty_(l2_penalty) {
  if (buffer_capacity == 0) throw std::invalid_argument("buffer capacity must be >= 1");
}

double StrategyCompatibility::predict(const ProfilingFeatures& phi) const {
  return predict_compatibility(model_, phi);
}

void StrategyCompatibility::record_outcome(const ProfilingFeatures& phi, double reward,
                                           std::mt19937_64& rng) {
  buffer_.push_back({phi, reward > 0.0 ? 1 : 0});
  if (buffer_.size() > capacity_) buffer_.pop_front();
  if (buffer_.size() == capacity_) {
    std::vector<LabeledSample> samples(buffer_.begin(), buffer_.end());
    sgd_epoch(model_, samples, learning_rate_, l2_penalty_, rng);
  }
}

void StrategyCompatibility::train_epoch(std::span<const LabeledSample> samples,
                                        std::mt19937_64& rng) {
  sgd_epoch(model_, samples, learning_rate_, l2_penalty_, rng);
}

CompatibilitySet::CompatibilitySet(std::size_t num_strategies, std::size_t buffer_capacity,
                                   double learning_rate, double l2_penalty)
    : l2_penalty_(l2_penalty) {
  models_.reserve(num_strategies);
  for (std::size_t s = 0; s < num_strategies; ++s) {
    models_.emplace_back(buffer_capacity, learning_rate, l2_penalty);
  }
}

void CompatibilitySet::warm_start(
    const std::vector<std::vector<LabeledSample>>& pairs_per_strategy,
    std::mt19937_64& rng, double learning_rate) {
  if (pairs_per_strategy.empty()) return;
  if (pairs_per_strategy.size() != models_.size()) {
    throw std::invalid_argument("warm_start: one pair set per strategy expected");
  }
  for (std::size_t s = 0; s < models_.size(); ++s) {
    if (!pairs_per_strategy[s].empty()) {
      sgd_epoch(models_[s].model(), pairs_per_strategy[s], learning_rate, l2_penalty_, rng);
    }
  }
}

double CompatibilitySet::predict(StrategyId s, const ProfilingFeatures& phi) const {
  return models_.at(s).predict(phi);
}

void CompatibilitySet::record_outcome(StrategyId s, const ProfilingFeatures& phi,
                                      double reward, std::mt19937_64& rng) {
  models_.at(s).record_outcome(phi, reward, rng);
}

void CompatibilitySet::save_parameters(std::ostream& out) const {
  char buf[32];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << '\t' << buf;
  };
  out << "strategy";
  for (std::size_t c = 0; c < kProfilingDims; ++c) out << "\tw" << c;
  out << "\tbias\n";
  for (std::size_t s = 0; s < models_.size(); ++s) {
    out << s;
    for (double w : models_[s].model().weights) emit(w);
    emit(models_[s].model().bias);
    out << '\n';
  }
}

void CompatibilitySet::load_parameters(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("model table: missing header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t s = 0;
    if (!(row >> s) || s >= models_.size()) {
      throw std::runtime_error("model table: bad strategy id");
    }
    LogisticModel& model = models_[s].model();
    for (std::size_t c = 0; c < kProfilingDims; ++c) {
      if (!(row >> model.weights[c])) throw std::runtime_error("model table: bad weight");
    }
    if (!(row >> model.bias)) throw std::runtime_error("model table: bad bias");
  }
}

}  // namespace kb
