#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "kernelband/compatibility.hpp"

using namespace kb;

namespace {

ProfilingFeatures phi_all(double v) {
  ProfilingFeatures phi;
  phi.fill(v);
  return phi;
}

CounterRanges unit_ranges() {
  CounterRanges ranges;
  ranges.fill({0.0, 1.0});
  return ranges;
}

// Independent reference for the gradient check: regularized mean log-loss.
double reference_loss(const LogisticModel& model, std::span<const LabeledSample> batch,
                      double l2) {
  double total = 0.0;
  for (const auto& sample : batch) {
    double z = model.bias;
    for (std::size_t c = 0; c < kProfilingDims; ++c) z += model.weights[c] * sample.phi[c];
    const double p = 1.0 / (1.0 + std::exp(-z));
    total += sample.label == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  total /= static_cast<double>(batch.size());
  double wsq = 0.0;
  for (double w : model.weights) wsq += w * w;
  return total + 0.5 * l2 * wsq;
}

}  // namespace

TEST_CASE("min-max features: pool statistics") {
  CounterRanges ranges;
  ranges.fill({0.2, 0.8});

  std::array<double, kProfilingDims> raw;
  raw.fill(0.2);
  CHECK(profiling_feature_vector(raw, ranges) == phi_all(0.0));
  raw.fill(0.5);
  CHECK(profiling_feature_vector(raw, ranges)[0] == doctest::Approx(0.5).epsilon(1e-15));
  raw.fill(0.8);
  CHECK(profiling_feature_vector(raw, ranges) == phi_all(1.0));
}

TEST_CASE("min-max features: degenerate counters map to 0.5") {
  CounterRanges ranges;
  ranges.fill({0.7, 0.7});
  std::array<double, kProfilingDims> raw;
  raw.fill(0.7);
  CHECK(profiling_feature_vector(raw, ranges) == phi_all(0.5));
}

TEST_CASE("min-max features: min above max is an error") {
  CounterRanges ranges;
  ranges.fill({1.0, 0.0});
  std::array<double, kProfilingDims> raw{};
  CHECK_THROWS_AS(profiling_feature_vector(raw, ranges), std::invalid_argument);
}

TEST_CASE("min-max features: common scaling of the pool changes nothing") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> value(0.5, 100.0);
  std::vector<std::array<double, kProfilingDims>> raws(6);
  for (auto& raw : raws) {
    for (auto& v : raw) v = value(rng);
  }
  auto ranges_of = [](const std::vector<std::array<double, kProfilingDims>>& pool) {
    CounterRanges ranges;
    for (std::size_t c = 0; c < kProfilingDims; ++c) {
      double lo = pool[0][c], hi = pool[0][c];
      for (const auto& raw : pool) {
        lo = std::min(lo, raw[c]);
        hi = std::max(hi, raw[c]);
      }
      ranges[c] = {lo, hi};
    }
    return ranges;
  };

  const double scale = 3.75;
  auto scaled = raws;
  for (auto& raw : scaled) {
    for (auto& v : raw) v *= scale;
  }
  const auto base_ranges = ranges_of(raws);
  const auto scaled_ranges = ranges_of(scaled);
  for (std::size_t i = 0; i < raws.size(); ++i) {
    const auto a = profiling_feature_vector(raws[i], base_ranges);
    const auto b = profiling_feature_vector(scaled[i], scaled_ranges);
    for (std::size_t c = 0; c < kProfilingDims; ++c) {
      CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("predict: sigmoid of the affine score") {
  LogisticModel model;
  CHECK(predict_compatibility(model, phi_all(0.3)) == 0.5);

  model.bias = 10.0;
  CHECK(predict_compatibility(model, phi_all(0.0)) ==
        doctest::Approx(0.9999546).epsilon(1e-6));

  model.bias = 0.0;
  model.weights[0] = 1.0;
  ProfilingFeatures phi{};  // phi[0] = 0 masks the only active weight
  CHECK(predict_compatibility(model, phi) == 0.5);
}

TEST_CASE("predict: strictly inside (0,1) with sigmoid symmetry") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double z = coef(rng) * 4.0;
    const double p = sigmoid(z);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(sigmoid(-z) == doctest::Approx(1.0 - p).epsilon(1e-12));
  }
}

TEST_CASE("record_outcome: labels are the positive-reward indicator") {
  StrategyCompatibility model(10, 0.1, 0.0);
  std::mt19937_64 rng(1);
  model.record_outcome(phi_all(0.1), 0.3, rng);
  model.record_outcome(phi_all(0.2), 0.0, rng);  // 0 is not > 0
  model.record_outcome(phi_all(0.3), -1.0, rng);
  REQUIRE(model.buffer().size() == 3);
  CHECK(model.buffer()[0].label == 1);
  CHECK(model.buffer()[1].label == 0);
  CHECK(model.buffer()[2].label == 0);
}

TEST_CASE("record_outcome: ring buffer holds capacity after the 501st insert") {
  const std::size_t capacity = 500;
  StrategyCompatibility model(capacity, 0.1, 1e-4);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 501; ++i) {
    model.record_outcome(phi_all(i / 501.0), i % 2 == 0 ? 0.4 : -0.4, rng);
  }
  CHECK(model.buffer().size() == capacity);
  // oldest entry evicted, order preserved
  CHECK(model.buffer().front().phi[0] == doctest::Approx(1.0 / 501.0));
  CHECK(model.buffer().back().phi[0] == doctest::Approx(500.0 / 501.0));
}

TEST_CASE("gradient: numerically saturated fit has zero gradient") {
  LogisticModel model;
  model.weights[0] = 800.0;  // exp(-800) underflows to exactly 0
  std::vector<LabeledSample> batch = {{phi_all(1.0), 1}};
  ProfilingFeatures negative{};
  negative[0] = -1.0;  // z = -800, sigma saturates to exactly 0
  batch.push_back({negative, 0});

  const LogisticGradient grad = logistic_loss_gradient(model, batch, 0.0);
  for (double g : grad.weights) CHECK(g == 0.0);
  CHECK(grad.bias == 0.0);
}

TEST_CASE("gradient: single-sample closed form") {
  LogisticModel model;
  std::vector<LabeledSample> batch = {{phi_all(1.0), 1}};
  const LogisticGradient grad = logistic_loss_gradient(model, batch, 0.0);
  for (double g : grad.weights) CHECK(g == -0.5);
  CHECK(grad.bias == -0.5);
}

TEST_CASE("gradient: empty batch is an error") {
  CHECK_THROWS_AS(logistic_loss_gradient(LogisticModel{}, std::vector<LabeledSample>{}, 0.0),
                  std::invalid_argument);
}

TEST_CASE("gradient: matches central finite differences over 100 draws") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> batch_size(1, 8);
  std::uniform_int_distribution<int> coin(0, 1);
  const double penalties[] = {0.0, 1e-4, 1e-2};
  const double h = 1e-6;

  for (int draw = 0; draw < 100; ++draw) {
    LogisticModel model;
    for (auto& w : model.weights) w = coef(rng);
    model.bias = coef(rng);
    const double l2 = penalties[draw % 3];

    std::vector<LabeledSample> batch(batch_size(rng));
    for (auto& sample : batch) {
      for (auto& v : sample.phi) v = unit(rng);
      sample.label = coin(rng);
    }

    const LogisticGradient grad = logistic_loss_gradient(model, batch, l2);

    double err_sq = 0.0;
    double ref_sq = 0.0;
    auto accumulate = [&](double analytic, double numeric) {
      err_sq += (analytic - numeric) * (analytic - numeric);
      ref_sq += numeric * numeric;
    };
    for (std::size_t c = 0; c < kProfilingDims; ++c) {
      LogisticModel plus = model, minus = model;
      plus.weights[c] += h;
      minus.weights[c] -= h;
      accumulate(grad.weights[c],
                 (reference_loss(plus, batch, l2) - reference_loss(minus, batch, l2)) / (2 * h));
    }
    LogisticModel plus = model, minus = model;
    plus.bias += h;
    minus.bias -= h;
    accumulate(grad.bias,
               (reference_loss(plus, batch, l2) - reference_loss(minus, batch, l2)) / (2 * h));

    CHECK(std::sqrt(err_sq) < 1e-5 * std::max(std::sqrt(ref_sq), 1e-3));
  }
}

TEST_CASE("sgd epoch: saturated fit stays fixed") {
  LogisticModel model;
  model.weights[0] = 800.0;
  ProfilingFeatures negative{};
  negative[0] = -1.0;
  std::vector<LabeledSample> samples = {{phi_all(1.0), 1}, {negative, 0}};

  const LogisticModel before = model;
  std::mt19937_64 rng(5);
  sgd_epoch(model, samples, 0.1, 0.0, rng);
  CHECK(model.weights == before.weights);
  CHECK(model.bias == before.bias);
}

TEST_CASE("sgd epoch: bitwise reproducible under a fixed seed") {
  std::mt19937_64 data_rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<LabeledSample> samples(64);
  for (auto& s : samples) {
    for (auto& v : s.phi) v = unit(data_rng);
    s.label = unit(data_rng) > 0.5 ? 1 : 0;
  }
  LogisticModel a, b;
  std::mt19937_64 rng_a(99), rng_b(99);
  sgd_epoch(a, samples, 0.1, 1e-4, rng_a);
  sgd_epoch(b, samples, 0.1, 1e-4, rng_b);
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
}

TEST_CASE("sgd epoch: learns a separable problem as well as batch descent") {
  // 200 samples, margin 0.5 along feature 0.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<LabeledSample> samples(200);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& s = samples[i];
    s.label = i % 2 == 0 ? 1 : 0;
    for (auto& v : s.phi) v = unit(rng);
    s.phi[0] = s.label == 1 ? 0.75 + 0.25 * unit(rng) : 0.25 * unit(rng);
  }

  auto accuracy = [&](const LogisticModel& model) {
    int hits = 0;
    for (const auto& s : samples) {
      const double p = predict_compatibility(model, s.phi);
      if ((p >= 0.5 ? 1 : 0) == s.label) ++hits;
    }
    return static_cast<double>(hits) / samples.size();
  };

  // Independent reference: full-batch gradient descent on the same data.
  LogisticModel reference;
  for (int step = 0; step < 2000; ++step) {
    const LogisticGradient grad = logistic_loss_gradient(reference, samples, 0.0);
    for (std::size_t c = 0; c < kProfilingDims; ++c) reference.weights[c] -= 0.5 * grad.weights[c];
    reference.bias -= 0.5 * grad.bias;
  }
  REQUIRE(accuracy(reference) >= 0.95);

  LogisticModel model;
  std::mt19937_64 sgd_rng(12);
  for (int epoch = 0; epoch < 50; ++epoch) {
    sgd_epoch(model, samples, 0.1, 1e-4, sgd_rng);
  }
  CHECK(accuracy(model) >= 0.95);
}

TEST_CASE("warm start: default is the 0.5 prior") {
  CompatibilitySet set(3, 500, 0.1, 1e-4);
  std::mt19937_64 rng(1);
  set.warm_start({}, rng);
  for (StrategyId s = 0; s < 3; ++s) {
    CHECK(set.predict(s, phi_all(0.9)) == 0.5);
    CHECK(set.predict(s, phi_all(0.0)) == 0.5);
  }
}

TEST_CASE("warm start: all-positive pairs push the bias up") {
  CompatibilitySet set(1, 500, 0.1, 1e-4);
  std::mt19937_64 rng(2);
  std::vector<std::vector<LabeledSample>> pairs(1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    LabeledSample s;
    for (auto& v : s.phi) v = unit(rng);
    s.label = 1;
    pairs[0].push_back(s);
  }
  set.warm_start(pairs, rng);
  CHECK(set.strategy(0).model().bias > 0.0);
}

TEST_CASE("warm start: balanced uncorrelated pairs keep psi near 0.5") {
  CompatibilitySet set(1, 500, 0.1, 1e-4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<LabeledSample>> pairs(1);
  for (int i = 0; i < 1000; ++i) {
    LabeledSample s;
    for (auto& v : s.phi) v = unit(rng);
    s.label = i % 2;
    pairs[0].push_back(s);
  }
  set.warm_start(pairs, rng);
  for (int i = 0; i < 100; ++i) {
    ProfilingFeatures held_out;
    for (auto& v : held_out) v = unit(rng);
    CHECK(std::abs(set.predict(0, held_out) - 0.5) < 0.1);
  }
}

TEST_CASE("parameter table: save/load round trip") {
  CompatibilitySet set(2, 500, 0.1, 1e-4);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (StrategyId s = 0; s < 2; ++s) {
    for (auto& w : set.strategy(s).model().weights) w = coef(rng);
    set.strategy(s).model().bias = coef(rng);
  }

  std::stringstream io;
  set.save_parameters(io);
  CompatibilitySet restored(2, 500, 0.1, 1e-4);
  restored.load_parameters(io);
  for (StrategyId s = 0; s < 2; ++s) {
    CHECK(restored.strategy(s).model().weights == set.strategy(s).model().weights);
    CHECK(restored.strategy(s).model().bias == set.strategy(s).model().bias);
  }
}
