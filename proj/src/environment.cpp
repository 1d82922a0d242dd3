#include "kernelband/environment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace kb {

namespace {

void replace_all(std::string& text, const std::string& needle, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

std::string trimmed(const std::string& text) {
  auto begin = std::find_if_not(text.begin(), text.end(),
                                [](unsigned char c) { return std::isspace(c); });
  auto end = std::find_if_not(text.rbegin(), text.rend(),
                              [](unsigned char c) { return std::isspace(c); })
                 .base();
  return begin < end ? std::string(begin, end) : std::string();
}

}  // namespace

std::string llm_prompt_render(const std::string& kernel_source, const Strategy& strategy,
                              const std::string& prompt_template) {
  if (prompt_template.find("{source}") == std::string::npos) {
    throw std::invalid_argument("prompt template: missing {source} placeholder");
  }
  if (prompt_template.find("{strategy}") == std::string::npos) {
    throw std::invalid_argument("prompt template: missing {strategy} placeholder");
  }
  std::string prompt = prompt_template;
  replace_all(prompt, "{strategy}", strategy.description);
  replace_all(prompt, "{source}", kernel_source);
  return prompt;
}

std::optional<std::string> llm_response_extract(const std::string& response) {
  const std::string fence = "```";
  std::size_t open = response.find(fence);
  if (open != std::string::npos) {
    std::size_t body = response.find('\n', open);
    if (body != std::string::npos) {
      std::size_t close = response.find(fence, body + 1);
      if (close != std::string::npos) {
        std::string block = response.substr(body + 1, close - body - 1);
        if (!block.empty() && block.back() == '\n') block.pop_back();
        if (!block.empty()) return block;
        return std::nullopt;
      }
    }
  }
  std::string whole = trimmed(response);
  if (whole.empty()) return std::nullopt;
  return whole;
}

LlmTransformAdapter::LlmTransformAdapter(PromptSender sender, std::string prompt_template)
    : sender_(std::move(sender)), template_(std::move(prompt_template)) {
  if (!sender_) throw std::invalid_argument("llm adapter: sender required");
  // Fail fast on a broken template.
  llm_prompt_render("", Strategy{}, template_);
}

TransformOutcome LlmTransformAdapter::transform(const KernelCandidate& parent,
                                                const Strategy& strategy) const {
  const std::string prompt = llm_prompt_render(parent.source, strategy, template_);
  const std::string response = sender_(prompt);
  auto source = llm_response_extract(response);
  if (!source.has_value()) return TransformOutcome::generation_failure();
  return TransformOutcome::success(std::move(*source));
}

bool correctness_check(std::span<const double> candidate, std::span<const double> reference,
                       double atol, double rtol) {
  if (candidate.size() != reference.size()) {
    throw std::invalid_argument("correctness check: length mismatch");
  }
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (std::abs(candidate[i] - reference[i]) > atol + rtol * std::abs(reference[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace kb
