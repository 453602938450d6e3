#pragma once

// Structured think/answer parsing and the composite (format + answer) reward.

#include <array>
#include <string>
#include <string_view>

#include "curriq/error.hpp"
#include "curriq/eval_core.hpp"

namespace curriq {

struct StructuredResponse {
  std::string think;
  std::string answer;
  bool well_formed = false;
};

struct RewardConfig {
  double format_weight = 0.5;
  double answer_weight = 1.0;
  double acceptable_reward = 0.5;

  void validate() const {
    if (!(format_weight >= 0.0)) {
      throw usage_error("rewards.format_weight must be >= 0");
    }
    if (!(answer_weight > 0.0)) {
      throw usage_error("rewards.answer_weight must be > 0");
    }
  }
};

struct RewardBreakdown {
  double format_reward = 0.0;
  double answer_reward = 0.0;
  double total = 0.0;
  JudgmentLabel label = JudgmentLabel::Missing;
};

namespace detail {

inline constexpr std::array<std::string_view, 4> kTags = {
    "<think>", "</think>", "<answer>", "</answer>"};

inline bool has_tag(std::string_view s) {
  for (auto tag : kTags) {
    if (s.find(tag) != std::string_view::npos) return true;
  }
  return false;
}

// Extracts `<open>content</close>` at the start of `s`, advancing `s` past it.
inline bool take_block(std::string_view& s, std::string_view open,
                       std::string_view close, std::string_view& content) {
  if (!s.starts_with(open)) return false;
  s.remove_prefix(open.size());
  const auto end = s.find(close);
  if (end == std::string_view::npos) return false;
  content = s.substr(0, end);
  if (has_tag(content)) return false;
  s.remove_prefix(end + close.size());
  return true;
}

}  // namespace detail

// Accepts exactly `<think>...</think>` followed by `<answer>...</answer>`,
// with only whitespace around and between the blocks.
inline StructuredResponse parse_structured_response(std::string_view raw) {
  std::string_view s = text::trim(raw);
  std::string_view think, answer;
  if (!detail::take_block(s, "<think>", "</think>", think)) return {};
  s = text::trim(s);
  if (!detail::take_block(s, "<answer>", "</answer>", answer)) return {};
  if (!text::trim(s).empty()) return {};
  return {std::string(think), std::string(answer), true};
}

inline double format_reward(std::string_view raw) {
  return parse_structured_response(raw).well_formed ? 1.0 : 0.0;
}

inline double answer_reward(JudgmentLabel label, const RewardConfig& cfg) {
  switch (label) {
    case JudgmentLabel::Perfect:
      return 1.0;
    case JudgmentLabel::Acceptable:
      return cfg.acceptable_reward;
    case JudgmentLabel::Missing:
      return 0.0;
    case JudgmentLabel::Incorrect:
      return -1.0;
  }
  return 0.0;
}

// Malformed responses are judged on the raw text rather than forced to
// Missing, so abstention has to be expressed in content.
inline RewardBreakdown composite_reward(std::string_view raw,
                                        std::string_view ground_truth,
                                        const Judge& judge,
                                        const RewardConfig& cfg,
                                        std::string_view question = {},
                                        std::string_view rollout_id = {}) {
  const auto parsed = parse_structured_response(raw);
  RewardBreakdown out;
  out.format_reward = parsed.well_formed ? 1.0 : 0.0;
  JudgeRequest request{std::string(question), std::string(ground_truth),
                       parsed.well_formed ? parsed.answer : std::string(raw)};
  try {
    out.label = judge.judge(request);
  } catch (const Error& e) {
    throw Error(e.kind(), "rollout '" + std::string(rollout_id) +
                              "': judge failed: " + e.what());
  }
  out.answer_reward = answer_reward(out.label, cfg);
  out.total = cfg.format_weight * out.format_reward +
              cfg.answer_weight * out.answer_reward;
  return out;
}

}  // namespace curriq
