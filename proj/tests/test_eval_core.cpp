#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "curriq/eval_core.hpp"
#include "test_util.hpp"

using namespace curriq;
using curriq::testing::conversation;
using curriq::testing::fraction_labels;
using curriq::testing::labels;

TEST(ScoreLabel, FixedValues) {
  const EvalConfig cfg;
  EXPECT_EQ(score_label(JudgmentLabel::Perfect, cfg), 1.0);
  EXPECT_EQ(score_label(JudgmentLabel::Acceptable, cfg), 0.5);
  EXPECT_EQ(score_label(JudgmentLabel::Missing, cfg), 0.0);
  EXPECT_EQ(score_label(JudgmentLabel::Incorrect, cfg), -1.0);
}

TEST(ParseLabel, RoundTripAndUnknown) {
  for (auto l : {JudgmentLabel::Perfect, JudgmentLabel::Acceptable,
                 JudgmentLabel::Missing, JudgmentLabel::Incorrect}) {
    EXPECT_EQ(parse_label(to_string(l)), l);
  }
  EXPECT_EQ(parse_label("  Perfect "), JudgmentLabel::Perfect);
  EXPECT_FALSE(parse_label("great").has_value());
}

TEST(Aggregate, SingleTurnFractions) {
  // 2 perfect, 1 missing, 1 incorrect
  const auto m = aggregate_metrics(single_turn_conversations(labels("PPMI")), {});
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.missing, 0.25);
  EXPECT_DOUBLE_EQ(m.hallucination, 0.25);
  EXPECT_DOUBLE_EQ(m.truthfulness, 0.25);
  EXPECT_EQ(m.n_items, 4u);
}

TEST(Aggregate, AllMissing) {
  const auto m = aggregate_metrics(single_turn_conversations(labels("MMMMM")), {});
  EXPECT_EQ(m.accuracy, 0.0);
  EXPECT_EQ(m.hallucination, 0.0);
  EXPECT_EQ(m.truthfulness, 0.0);
  EXPECT_EQ(m.missing, 1.0);
}

TEST(Aggregate, PublishedLabelFractions) {
  const auto a = aggregate_metrics(
      single_turn_conversations(fraction_labels(0.197, 0.085, 0.718, 1000)), {});
  EXPECT_NEAR(a.truthfulness, -0.520, 0.002);
  const auto b = aggregate_metrics(
      single_turn_conversations(fraction_labels(0.262, 0.237, 0.501, 1000)), {});
  EXPECT_NEAR(b.truthfulness, -0.238, 0.002);
}

TEST(Aggregate, EmptyInputIsDataError) {
  try {
    aggregate_metrics({}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
  }
  EXPECT_THROW(aggregate_metrics({Conversation{"c", {}}}, {}), Error);
}

TEST(Termination, HandCase) {
  EXPECT_DOUBLE_EQ(conversation_score(conversation("c", "PIIP"), {}), -0.25);
}

TEST(Termination, TriggeringRunKeepsScores) {
  EXPECT_EQ(apply_termination(labels("IIPPA"), {}), labels("IIMMM"));
  EXPECT_EQ(apply_termination(labels("IPIPI"), {}), labels("IPIPI"));
  EXPECT_EQ(apply_termination(labels("PII"), {}), labels("PII"));
}

TEST(Termination, RunLengthIsConfigurable) {
  EvalConfig cfg;
  cfg.termination_run_length = 3;
  EXPECT_EQ(apply_termination(labels("IIPIIIP"), cfg), labels("IIPIIIM"));
}

TEST(Aggregate, MacroVersusMicro) {
  const std::vector<Conversation> convs = {conversation("a", "P"),
                                           conversation("b", "IMMM")};
  EvalConfig cfg;
  EXPECT_DOUBLE_EQ(aggregate_metrics(convs, cfg).truthfulness, (1.0 - 0.25) / 2);
  cfg.aggregation = Aggregation::Micro;
  EXPECT_DOUBLE_EQ(aggregate_metrics(convs, cfg).truthfulness, 0.0);
}

TEST(Aggregate, Properties) {
  std::mt19937_64 rng(11);
  const EvalConfig cfg;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<JudgmentLabel> ls(1 + rng() % 40);
    for (auto& l : ls) l = static_cast<JudgmentLabel>(rng() % 4);
    const auto m = aggregate_metrics(single_turn_conversations(ls), cfg);
    EXPECT_NEAR(m.accuracy + m.acceptable + m.missing + m.hallucination, 1.0, 1e-12);
    EXPECT_NEAR(m.truthfulness, m.accuracy + 0.5 * m.acceptable - m.hallucination, 1e-12);
    EXPECT_GE(m.truthfulness, -1.0);
    EXPECT_LE(m.truthfulness, 1.0);
    auto shuffled = ls;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_NEAR(aggregate_metrics(single_turn_conversations(shuffled), cfg).truthfulness,
                m.truthfulness, 1e-12);

    // Termination only turns labels into Missing.
    const auto eff = apply_termination(ls, cfg);
    for (std::size_t i = 0; i < ls.size(); ++i) {
      EXPECT_TRUE(eff[i] == ls[i] || eff[i] == JudgmentLabel::Missing);
    }
  }
}

TEST(BuiltinJudge, Examples) {
  const EvalConfig cfg;
  EXPECT_EQ(judge("It is Paris.", "paris", cfg), JudgmentLabel::Perfect);
  EXPECT_EQ(judge("Lyon", "Paris", cfg), JudgmentLabel::Incorrect);
  EXPECT_EQ(judge("I don't know", "Paris", cfg), JudgmentLabel::Missing);
  EXPECT_EQ(judge("I'm sorry, I cannot answer that", "Paris", cfg),
            JudgmentLabel::Missing);
  EXPECT_EQ(judge("", "Paris", cfg), JudgmentLabel::Missing);
  EXPECT_EQ(judge("   ", "Paris", cfg), JudgmentLabel::Missing);

  EvalConfig exact;
  exact.match = MatchPolicy::Exact;
  EXPECT_EQ(judge("It is Paris.", "paris", exact), JudgmentLabel::Incorrect);
  EXPECT_EQ(judge("PARIS!", "paris", exact), JudgmentLabel::Perfect);
}

TEST(BuiltinJudge, EmptyGroundTruthDoesNotMatchEverything) {
  EXPECT_EQ(judge("anything", "", {}), JudgmentLabel::Incorrect);
}

TEST(BuiltinJudge, ViaInterface) {
  const BuiltinJudge j;
  const Judge& base = j;
  EXPECT_EQ(base.judge({"q", "42", "the answer is 42"}), JudgmentLabel::Perfect);
}

TEST(EvalConfig, Validation) {
  EvalConfig cfg;
  cfg.termination_run_length = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.acceptable_score = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
}
