#pragma once

#include <deque>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "kernelband/core.hpp"

namespace kb {

// Min-max normalized hardware counters, all components in [0, 1].
using ProfilingFeatures = std::array<double, kProfilingDims>;

struct CounterRange {
  double min = 0.0;
  double max = 0.0;
};
using CounterRanges = std::array<CounterRange, kProfilingDims>;

// Pool-wide per-counter min/max statistics.
CounterRanges counter_ranges(std::span<const KernelCandidate> pool);

// (x - min) / (max - min) per counter; a degenerate counter (min == max)
// maps to 0.5 so the logistic heads stay near their prior.
ProfilingFeatures profiling_feature_vector(const std::array<double, kProfilingDims>& raw,
                                           const CounterRanges& ranges);

double sigmoid(double z);

struct LogisticModel {
  std::array<double, kProfilingDims> weights{};
  double bias = 0.0;
};

// sigma(w . phi + b)
double predict_compatibility(const LogisticModel& model, const ProfilingFeatures& phi);

struct LabeledSample {
  ProfilingFeatures phi{};
  int label = 0;  // 1 iff the pull produced positive reward
};

struct LogisticGradient {
  std::array<double, kProfilingDims> weights{};
  double bias = 0.0;
};

// Mean over the batch of (sigma(z) - y) * phi plus l2 * w; the bias term is
// unregularized.
LogisticGradient logistic_loss_gradient(const LogisticModel& model,
                                        std::span<const LabeledSample> batch,
                                        double l2_penalty);

// One shuffled pass of per-sample updates theta <- theta - eta * grad.
void sgd_epoch(LogisticModel& model, std::span<const LabeledSample> samples,
               double learning_rate, double l2_penalty, std::mt19937_64& rng);

// One strategy's logistic head plus its bounded outcome buffer.
class StrategyCompatibility {
 public:
  StrategyCompatibility(std::size_t buffer_capacity, double learning_rate,
                        double l2_penalty);

  double predict(const ProfilingFeatures& phi) const;

  // Appends (phi, reward > 0), evicting FIFO beyond capacity. Any insert that
  // leaves the buffer at capacity runs one epoch over it; the buffer is
  // retained (ring semantics).
  void record_outcome(const ProfilingFeatures& phi, double reward, std::mt19937_64& rng);

  void train_epoch(std::span<const LabeledSample> samples, std::mt19937_64& rng);

  const LogisticModel& model() const { return model_; }
  LogisticModel& model() { return model_; }
  const std::deque<LabeledSample>& buffer() const { return buffer_; }

 private:
  LogisticModel model_;
  std::deque<LabeledSample> buffer_;
  std::size_t capacity_;
  double learning_rate_;
  double l2_penalty_;
};

// Supervised pre-training rate. Smaller than the streaming rate so that an
// uninformative pair batch leaves the prior near 0.5 instead of a random
// final SGD iterate.
inline constexpr double kPretrainLearningRate = 0.01;

// The per-strategy model set.
class CompatibilitySet {
 public:
  CompatibilitySet(std::size_t num_strategies, std::size_t buffer_capacity,
                   double learning_rate, double l2_penalty);

  // Zero parameters already satisfy the cold-start target (psi = 0.5 for any
  // input); when synthetic pairs are supplied each strategy gets one epoch
  // over its pairs.
  void warm_start(const std::vector<std::vector<LabeledSample>>& pairs_per_strategy,
                  std::mt19937_64& rng, double learning_rate = kPretrainLearningRate);

  double predict(StrategyId s, const ProfilingFeatures& phi) const;
  void record_outcome(StrategyId s, const ProfilingFeatures& phi, double reward,
                      std::mt19937_64& rng);

  StrategyCompatibility& strategy(StrategyId s) { return models_.at(s); }
  const StrategyCompatibility& strategy(StrategyId s) const { return models_.at(s); }
  std::size_t size() const { return models_.size(); }

  // Flat text table: strategy id, 9 weights, bias.
  void save_parameters(std::ostream& out) const;
  void load_parameters(std::istream& in);

 private:
  std::vector<StrategyCompatibility> models_;
  double l2_penalty_;
};

}  // namespace kb
