#pragma once

// Judgment labels, per-turn scoring, the multi-turn termination rule and the
// aggregate metrics (accuracy, missing, hallucination, truthfulness).

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "curriq/error.hpp"
#include "curriq/text.hpp"

namespace curriq {

enum class JudgmentLabel { Perfect, Acceptable, Missing, Incorrect };

inline std::string_view to_string(JudgmentLabel label) {
  switch (label) {
    case JudgmentLabel::Perfect:
      return "perfect";
    case JudgmentLabel::Acceptable:
      return "acceptable";
    case JudgmentLabel::Missing:
      return "missing";
    case JudgmentLabel::Incorrect:
      return "incorrect";
  }
  return "missing";
}

inline std::optional<JudgmentLabel> parse_label(std::string_view s) {
  const auto norm = text::lowercase(text::trim(s));
  if (norm == "perfect") return JudgmentLabel::Perfect;
  if (norm == "acceptable") return JudgmentLabel::Acceptable;
  if (norm == "missing") return JudgmentLabel::Missing;
  if (norm == "incorrect") return JudgmentLabel::Incorrect;
  return std::nullopt;
}

enum class MatchPolicy { Substring, Exact };
enum class Aggregation { Macro, Micro };

struct EvalConfig {
  double acceptable_score = 0.5;
  std::size_t termination_run_length = 2;
  std::vector<std::string> refusal_patterns = {
      "i don't know", "i'm sorry", "cannot answer", "unable to answer",
      "i do not know"};
  MatchPolicy match = MatchPolicy::Substring;
  Aggregation aggregation = Aggregation::Macro;

  void validate() const {
    if (termination_run_length < 1) {
      throw usage_error("eval.termination_run_length must be >= 1");
    }
    if (!(acceptable_score >= 0.0 && acceptable_score <= 1.0)) {
      throw usage_error("eval.acceptable_score must lie in [0, 1]");
    }
  }
};

struct Turn {
  std::string question_id;
  std::string response;
  JudgmentLabel label = JudgmentLabel::Missing;
};

struct Conversation {
  std::string conversation_id;
  std::vector<Turn> turns;

  std::vector<JudgmentLabel> labels() const {
    std::vector<JudgmentLabel> out;
    out.reserve(turns.size());
    for (const auto& t : turns) out.push_back(t.label);
    return out;
  }
};

struct MetricsReport {
  double accuracy = 0.0;
  double missing = 0.0;
  double hallucination = 0.0;
  double acceptable = 0.0;
  double truthfulness = 0.0;
  std::size_t n_items = 0;
  std::size_t n_turns = 0;
};

inline double score_label(JudgmentLabel label, const EvalConfig& cfg) {
  switch (label) {
    case JudgmentLabel::Perfect:
      return 1.0;
    case JudgmentLabel::Acceptable:
      return cfg.acceptable_score;
    case JudgmentLabel::Missing:
      return 0.0;
    case JudgmentLabel::Incorrect:
      return -1.0;
  }
  return 0.0;
}

// Once `termination_run_length` consecutive Incorrect labels have been seen,
// every later turn becomes Missing. The triggering run keeps its labels.
inline std::vector<JudgmentLabel> apply_termination(
    std::vector<JudgmentLabel> labels, const EvalConfig& cfg) {
  std::size_t run = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (run >= cfg.termination_run_length) {
      labels[i] = JudgmentLabel::Missing;
      continue;
    }
    run = labels[i] == JudgmentLabel::Incorrect ? run + 1 : 0;
  }
  return labels;
}

inline double conversation_score(const Conversation& conv,
                                  const EvalConfig& cfg) {
  if (conv.turns.empty()) {
    throw data_error("empty conversation: '" + conv.conversation_id + "'");
  }
  const auto effective = apply_termination(conv.labels(), cfg);
  double sum = 0.0;
  for (auto l : effective) sum += score_label(l, cfg);
  return sum / static_cast<double>(effective.size());
}

struct ConversationResult {
  std::string conversation_id;
  std::size_t n_turns = 0;
  double score = 0.0;
};

struct EvaluationReport {
  MetricsReport metrics;
  std::vector<ConversationResult> conversations;
};

// Label fractions are taken over all effective turns. Truthfulness is the
// mean of per-conversation scores (macro) or the mean over turns (micro).
inline EvaluationReport evaluate_conversations(
    const std::vector<Conversation>& items, const EvalConfig& cfg) {
  if (items.empty()) {
    throw data_error("aggregate_metrics: no conversations to aggregate");
  }
  EvaluationReport report;
  report.conversations.reserve(items.size());
  std::size_t perfect = 0, acceptable = 0, missing = 0, incorrect = 0;
  double macro_sum = 0.0;
  double micro_sum = 0.0;
  for (const auto& conv : items) {
    if (conv.turns.empty()) {
      throw data_error("empty conversation: '" + conv.conversation_id + "'");
    }
    const auto effective = apply_termination(conv.labels(), cfg);
    double conv_sum = 0.0;
    for (auto l : effective) {
      switch (l) {
        case JudgmentLabel::Perfect:
          ++perfect;
          break;
        case JudgmentLabel::Acceptable:
          ++acceptable;
          break;
        case JudgmentLabel::Missing:
          ++missing;
          break;
        case JudgmentLabel::Incorrect:
          ++incorrect;
          break;
      }
      conv_sum += score_label(l, cfg);
    }
    const double conv_score = conv_sum / static_cast<double>(effective.size());
    report.conversations.push_back(
        {conv.conversation_id, effective.size(), conv_score});
    macro_sum += conv_score;
    micro_sum += conv_sum;
  }
  auto& m = report.metrics;
  m.n_items = items.size();
  m.n_turns = perfect + acceptable + missing + incorrect;
  const double n = static_cast<double>(m.n_turns);
  m.accuracy = static_cast<double>(perfect) / n;
  m.acceptable = static_cast<double>(acceptable) / n;
  m.missing = static_cast<double>(missing) / n;
  m.hallucination = static_cast<double>(incorrect) / n;
  m.truthfulness = cfg.aggregation == Aggregation::Macro
                       ? macro_sum / static_cast<double>(items.size())
                       : micro_sum / n;
  return report;
}

inline MetricsReport aggregate_metrics(const std::vector<Conversation>& items,
                                       const EvalConfig& cfg) {
  return evaluate_conversations(items, cfg).metrics;
}

// Single-turn convenience: one conversation per label.
inline std::vector<Conversation> single_turn_conversations(
    const std::vector<JudgmentLabel>& labels) {
  std::vector<Conversation> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto id = std::to_string(i);
    out.push_back({id, {{id, "", labels[i]}}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Judging

struct JudgeRequest {
  std::string question;
  std::string ground_truth;
  std::string response;
};

// Plug point for answer judging. Implementations must be safe to call from
// several threads if the caller parallelizes.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual JudgmentLabel judge(const JudgeRequest& request) const = 0;
};

inline bool contains_refusal(std::string_view normalized_response,
                             const EvalConfig& cfg) {
  for (const auto& pattern : cfg.refusal_patterns) {
    const auto p = text::normalize_answer(pattern);
    if (!p.empty() && normalized_response.find(p) != std::string_view::npos) {
      return true;
    }
  }
  return false;
}

// String-matching judge. Never emits Acceptable.
inline JudgmentLabel judge(std::string_view response,
                           std::string_view ground_truth,
                           const EvalConfig& cfg) {
  const auto r = text::normalize_answer(response);
  if (r.empty() || contains_refusal(r, cfg)) return JudgmentLabel::Missing;
  const auto g = text::normalize_answer(ground_truth);
  const bool match = cfg.match == MatchPolicy::Exact || g.empty()
                         ? r == g
                         : r.find(g) != std::string::npos;
  return match ? JudgmentLabel::Perfect : JudgmentLabel::Incorrect;
}

class BuiltinJudge final : public Judge {
 public:
  explicit BuiltinJudge(EvalConfig cfg = {}) : cfg_(std::move(cfg)) {}

  JudgmentLabel judge(const JudgeRequest& request) const override {
    return curriq::judge(request.response, request.ground_truth, cfg_);
  }

 private:
  EvalConfig cfg_;
};

}  // namespace curriq
