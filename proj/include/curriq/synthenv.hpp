#pragma once

// Synthetic abstention QA: questions with a latent competence p and a noisy
// feature x = logit(p) + N(0, obs_noise), a two-parameter attempt/abstain
// policy, and closed-form / brute-force reference values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "curriq/error.hpp"
#include "curriq/eval_core.hpp"
#include "curriq/grpo.hpp"
#include "curriq/rewards.hpp"

namespace curriq {

enum class PoolTag { Easy, Hard };

inline std::string_view to_string(PoolTag t) {
  return t == PoolTag::Easy ? "easy" : "hard";
}

struct SyntheticQuestion {
  std::string id;
  double competence = 0.0;
  double feature = 0.0;
  std::string ground_truth;
  PoolTag pool_tag = PoolTag::Easy;
};

struct EnvConfig {
  double easy_alpha = 8.0, easy_beta = 2.0;
  double hard_alpha = 2.0, hard_beta = 8.0;
  double obs_noise = 0.5;
  std::size_t easy_pool_size = 1300;
  std::size_t hard_pool_size = 2600;
  std::size_t eval_easy_size = 1000;
  std::size_t eval_hard_size = 2000;
  std::uint64_t seed = 0;

  void validate() const {
    if (easy_pool_size < 1 || hard_pool_size < 1) {
      throw usage_error("env pool sizes must be >= 1");
    }
    if (eval_easy_size + eval_hard_size < 1) {
      throw usage_error("env eval pool must not be empty");
    }
    if (!(obs_noise >= 0.0)) throw usage_error("env.obs_noise must be >= 0");
    for (double v : {easy_alpha, easy_beta, hard_alpha, hard_beta}) {
      if (!(v > 0.0)) throw usage_error("env Beta parameters must be > 0");
    }
  }
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(sigmoid(z)) without overflow.
inline double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

inline double logit_clamped(double p) {
  p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  return std::log(p / (1.0 - p));
}

namespace detail {

inline double sample_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

inline std::vector<SyntheticQuestion> make_pool(std::size_t n, double a,
                                                double b, double noise,
                                                PoolTag tag,
                                                const std::string& prefix,
                                                Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<SyntheticQuestion> pool;
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticQuestion q;
    q.id = prefix + std::to_string(i);
    q.competence = sample_beta(a, b, rng);
    const double eps = gauss(rng);
    q.feature = logit_clamped(q.competence) + (noise > 0.0 ? noise * eps : 0.0);
    q.ground_truth = "ans-" + q.id;
    q.pool_tag = tag;
    pool.push_back(std::move(q));
  }
  return pool;
}

}  // namespace detail

struct Pools {
  std::vector<SyntheticQuestion> easy;
  std::vector<SyntheticQuestion> hard;
};

inline Pools generate_pools(const EnvConfig& cfg) {
  Rng rng(cfg.seed);
  Pools p;
  p.easy = detail::make_pool(cfg.easy_pool_size, cfg.easy_alpha, cfg.easy_beta,
                             cfg.obs_noise, PoolTag::Easy, "e", rng);
  p.hard = detail::make_pool(cfg.hard_pool_size, cfg.hard_alpha, cfg.hard_beta,
                             cfg.obs_noise, PoolTag::Hard, "h", rng);
  return p;
}

// Held-out pool with the same per-tag distributions, drawn from a stream
// disjoint from the training pools.
inline std::vector<SyntheticQuestion> generate_eval_pool(const EnvConfig& cfg) {
  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  auto out = detail::make_pool(cfg.eval_easy_size, cfg.easy_alpha,
                               cfg.easy_beta, cfg.obs_noise, PoolTag::Easy,
                               "ve", rng);
  auto hard = detail::make_pool(cfg.eval_hard_size, cfg.hard_alpha,
                                cfg.hard_beta, cfg.obs_noise, PoolTag::Hard,
                                "vh", rng);
  out.insert(out.end(), std::make_move_iterator(hard.begin()),
             std::make_move_iterator(hard.end()));
  return out;
}

// Attempt with probability sigmoid(w*x + b). Action 0 abstains, 1 attempts.
// Parameters are {w, b}.
class ThresholdPolicy {
 public:
  using Observation = double;
  static constexpr std::size_t kAbstain = 0;
  static constexpr std::size_t kAttempt = 1;

  std::size_t num_params() const { return 2; }
  std::size_t num_actions() const { return 2; }

  static double attempt_probability(double x, std::span<const double> th) {
    return sigmoid(th[0] * x + th[1]);
  }

  std::vector<double> action_distribution(double x,
                                          std::span<const double> th) const {
    const double z = th[0] * x + th[1];
    return {sigmoid(-z), sigmoid(z)};
  }

  double log_prob(std::size_t a, double x, std::span<const double> th) const {
    const double z = th[0] * x + th[1];
    return a == kAttempt ? log_sigmoid(z) : log_sigmoid(-z);
  }

  std::vector<double> grad_log_prob(std::size_t a, double x,
                                    std::span<const double> th) const {
    const double z = th[0] * x + th[1];
    const double c = a == kAttempt ? sigmoid(-z) : -sigmoid(z);
    return {c * x, c};
  }

  std::size_t sample(double x, std::span<const double> th, Rng& rng) const {
    return uniform01(rng) < attempt_probability(x, th) ? kAttempt : kAbstain;
  }
};

struct RolloutResult {
  std::size_t action = 0;
  std::string response_text;
  JudgmentLabel label = JudgmentLabel::Missing;
};

inline constexpr std::string_view kRefusalResponse =
    "<think>I am not confident about this one.</think>"
    "<answer>I don't know</answer>";

// An attempt is correct with probability p; the wrong token never contains
// the ground truth.
inline std::string attempt_response(const SyntheticQuestion& q, Rng& rng) {
  const bool correct = uniform01(rng) < q.competence;
  return "<think>Recalling the answer.</think><answer>" +
         (correct ? q.ground_truth : "wrong-" + q.id) + "</answer>";
}

// Draws an action, then on attempt a Perfect answer with probability p and a
// wrong token otherwise. Labels come from the built-in judge.
inline RolloutResult rollout(const SyntheticQuestion& q,
                             const ThresholdPolicy& policy,
                             std::span<const double> params, Rng& rng,
                             const EvalConfig& eval_cfg = {}) {
  RolloutResult r;
  r.action = policy.sample(q.feature, params, rng);
  if (r.action == ThresholdPolicy::kAbstain) {
    r.response_text = std::string(kRefusalResponse);
  } else {
    r.response_text = attempt_response(q, rng);
  }
  const auto parsed = parse_structured_response(r.response_text);
  r.label = judge(parsed.answer, q.ground_truth, eval_cfg);
  return r;
}

// Reward source for the trainer: one structured response per action, scored
// with the composite reward.
class SyntheticEnv {
 public:
  using Prompt = SyntheticQuestion;

  explicit SyntheticEnv(RewardConfig reward_cfg = {}, EvalConfig eval_cfg = {})
      : reward_cfg_(reward_cfg), judge_(std::move(eval_cfg)) {}

  double observe(const SyntheticQuestion& q) const { return q.feature; }

  Outcome respond(const SyntheticQuestion& q, std::size_t action,
                  Rng& rng) const {
    Outcome oc;
    if (action == ThresholdPolicy::kAbstain) {
      oc.response_text = std::string(kRefusalResponse);
      oc.abstained = true;
    } else {
      oc.response_text = attempt_response(q, rng);
    }
    const auto rb = composite_reward(oc.response_text, q.ground_truth, judge_,
                                     reward_cfg_, q.id, q.id);
    oc.reward = rb.total;
    oc.label = rb.label;
    return oc;
  }

 private:
  RewardConfig reward_cfg_;
  BuiltinJudge judge_;
};

// Exact expectation of the truthfulness score: mean of sigma(wx+b)(2p-1).
inline double expected_policy_truthfulness(
    std::span<const double> params, std::span<const SyntheticQuestion> pool) {
  if (pool.empty()) throw data_error("expected_policy_truthfulness: empty pool");
  double s = 0.0;
  for (const auto& q : pool) {
    s += ThresholdPolicy::attempt_probability(q.feature, params) *
         (2.0 * q.competence - 1.0);
  }
  return s / static_cast<double>(pool.size());
}

// Closed-form label fractions of a threshold policy on a pool.
inline MetricsReport expected_policy_metrics(
    std::span<const double> params, std::span<const SyntheticQuestion> pool) {
  if (pool.empty()) throw data_error("expected_policy_metrics: empty pool");
  MetricsReport m;
  for (const auto& q : pool) {
    const double a = ThresholdPolicy::attempt_probability(q.feature, params);
    m.accuracy += a * q.competence;
    m.hallucination += a * (1.0 - q.competence);
    m.missing += 1.0 - a;
  }
  const double n = static_cast<double>(pool.size());
  m.accuracy /= n;
  m.hallucination /= n;
  m.missing /= n;
  m.truthfulness = m.accuracy - m.hallucination;
  m.n_items = pool.size();
  m.n_turns = pool.size();
  return m;
}

// Monte-Carlo evaluation: `rollouts_per_question` single-turn conversations
// per question, judged and aggregated through eval_core.
inline MetricsReport evaluate_policy_mc(std::span<const double> params,
                                        std::span<const SyntheticQuestion> pool,
                                        std::size_t rollouts_per_question,
                                        Rng& rng,
                                        const EvalConfig& eval_cfg = {}) {
  if (pool.empty()) throw data_error("evaluate_policy_mc: empty pool");
  if (rollouts_per_question < 1) {
    throw usage_error("evaluation rollouts per question must be >= 1");
  }
  ThresholdPolicy policy;
  std::vector<JudgmentLabel> labels;
  labels.reserve(pool.size() * rollouts_per_question);
  for (const auto& q : pool) {
    for (std::size_t k = 0; k < rollouts_per_question; ++k) {
      labels.push_back(rollout(q, policy, params, rng, eval_cfg).label);
    }
  }
  return aggregate_metrics(single_turn_conversations(labels), eval_cfg);
}

struct OracleResult {
  double threshold = 0.0;
  double value = 0.0;
  double informed_upper_bound = 0.0;
};

// Brute-force search over "attempt iff x >= t" on a grid spanning the
// observed feature range, plus one point above the maximum (never attempt).
inline OracleResult oracle_threshold_truthfulness(
    std::span<const SyntheticQuestion> pool, double grid_resolution = 1e-3) {
  if (pool.empty()) throw data_error("oracle: empty pool");
  if (!(grid_resolution > 0.0)) {
    throw usage_error("oracle grid resolution must be > 0");
  }
  std::vector<std::pair<double, double>> xs;
  xs.reserve(pool.size());
  OracleResult out;
  for (const auto& q : pool) {
    const double gain = 2.0 * q.competence - 1.0;
    xs.emplace_back(q.feature, gain);
    out.informed_upper_bound += std::max(0.0, gain);
  }
  std::sort(xs.begin(), xs.end());
  // suffix[i] = sum of gains of xs[i..]
  std::vector<double> suffix(xs.size() + 1, 0.0);
  for (std::size_t i = xs.size(); i-- > 0;) {
    suffix[i] = suffix[i + 1] + xs[i].second;
  }
  const double lo = xs.front().first;
  const double hi = xs.back().first;
  const auto steps =
      static_cast<std::size_t>(std::floor((hi - lo) / grid_resolution)) + 1;
  const double n = static_cast<double>(pool.size());
  bool first = true;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = i == steps ? hi + grid_resolution
                                : lo + static_cast<double>(i) * grid_resolution;
    const auto it = std::lower_bound(
        xs.begin(), xs.end(), t,
        [](const std::pair<double, double>& e, double v) { return e.first < v; });
    const double value =
        suffix[static_cast<std::size_t>(it - xs.begin())] / n;
    if (first || value > out.value) {
      out.value = value;
      out.threshold = t;
      first = false;
    }
  }
  out.informed_upper_bound /= n;
  return out;
}

}  // namespace curriq
