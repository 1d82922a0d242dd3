#pragma once

#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kernelband/compatibility.hpp"
#include "kernelband/core.hpp"

namespace kb {

struct TransformOutcome {
  enum class Failure { kNone, kGeneration, kCompile };

  Failure failure = Failure::kNone;
  std::string source;  // set only on success

  bool ok() const { return failure == Failure::kNone; }

  static TransformOutcome success(std::string src) {
    return {Failure::kNone, std::move(src)};
  }
  static TransformOutcome generation_failure() { return {Failure::kGeneration, {}}; }
  static TransformOutcome compile_failure() { return {Failure::kCompile, {}}; }
};

struct Evaluation {
  bool valid = false;
  std::optional<MeasurementRecord> measurement;  // present iff valid
  double compile_time_ms = 0.0;
};

// Transform/evaluate surface driven by the optimization loop. One instance
// serves one run.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const std::vector<Strategy>& strategies() const = 0;

  // Measured root kernels with ids 0..n-1, no parent, no applied strategy.
  virtual std::vector<KernelCandidate> seed_kernels(std::mt19937_64& rng) = 0;

  virtual TransformOutcome transform(const KernelCandidate& parent,
                                     const Strategy& strategy,
                                     std::mt19937_64& rng) = 0;

  // Only called on non-failure transform outcomes.
  virtual Evaluation evaluate(const std::string& source, std::mt19937_64& rng) = 0;

  // Ground truth, when the environment knows it (simulators do).
  virtual std::optional<double> optimal_mean_reward() const { return std::nullopt; }
  virtual std::optional<double> cluster_epsilon() const { return std::nullopt; }

  // Synthetic labeled pairs per strategy for compatibility warm-start; empty
  // when the environment cannot generate them.
  virtual std::vector<std::vector<LabeledSample>> pretraining_pairs(int /*per_strategy*/,
                                                                    std::mt19937_64&) {
    return {};
  }
};

// ---------------------------------------------------------------------------
// Generic text-generation-service adapter (transform side only).
// ---------------------------------------------------------------------------

// Substitutes {source} and {strategy} (the strategy description) verbatim.
// Both placeholders must be present.
std::string llm_prompt_render(const std::string& kernel_source, const Strategy& strategy,
                              const std::string& prompt_template);

// Content of the first fenced code block; without a fence, the whole trimmed
// text. Empty result means the generation failed.
std::optional<std::string> llm_response_extract(const std::string& response);

using PromptSender = std::function<std::string(const std::string& prompt)>;

// render -> send -> extract. The sender supplies the transport; tests use a
// canned one.
class LlmTransformAdapter {
 public:
  LlmTransformAdapter(PromptSender sender, std::string prompt_template);

  TransformOutcome transform(const KernelCandidate& parent, const Strategy& strategy) const;

 private:
  PromptSender sender_;
  std::string template_;
};

// Elementwise |candidate - reference| <= atol + rtol * |reference|.
bool correctness_check(std::span<const double> candidate, std::span<const double> reference,
                       double atol = 1e-3, double rtol = 1e-1);

}  // namespace kb
