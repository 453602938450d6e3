#pragma once

// Group-relative policy optimization over categorical policies: group
// advantages, the clipped surrogate, exact KL against a frozen reference and
// a single deterministic gradient-ascent step.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curriq/error.hpp"
#include "curriq/eval_core.hpp"

namespace curriq {

using Rng = std::mt19937_64;
using Params = std::vector<double>;

// Uniform double in [0, 1) built from the top 53 bits, so draws do not depend
// on the standard library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

enum class RefRefresh { Never, PerStage };

struct TrainerConfig {
  std::size_t group_size = 8;
  double clip_epsilon = 0.2;
  double kl_coef = 0.04;
  double std_epsilon = 1e-8;
  double learning_rate = 0.05;
  std::size_t prompts_per_step = 16;
  std::uint64_t seed = 0;
  RefRefresh ref_refresh = RefRefresh::PerStage;

  void validate() const {
    if (group_size < 2) throw usage_error("trainer.group_size must be >= 2");
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
      throw usage_error("trainer.clip_epsilon must lie in (0, 1)");
    }
    if (!(kl_coef >= 0.0)) throw usage_error("trainer.kl_coef must be >= 0");
    if (!(std_epsilon >= 0.0)) {
      throw usage_error("trainer.std_epsilon must be >= 0");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw usage_error("trainer.learning_rate must be a positive number");
    }
    if (prompts_per_step < 1) {
      throw usage_error("trainer.prompts_per_step must be >= 1");
    }
  }
};

// Behavioral contract for a trainable categorical policy. Parameters live
// outside the policy object so snapshots are plain vectors.
template <class P>
concept PolicyInterface = requires(const P& p, const typename P::Observation& o,
                                   std::span<const double> th, std::size_t a,
                                   Rng& rng) {
  typename P::Observation;
  { p.num_params() } -> std::convertible_to<std::size_t>;
  { p.num_actions() } -> std::convertible_to<std::size_t>;
  { p.action_distribution(o, th) } -> std::convertible_to<std::vector<double>>;
  { p.log_prob(a, o, th) } -> std::convertible_to<double>;
  { p.grad_log_prob(a, o, th) } -> std::convertible_to<std::vector<double>>;
  { p.sample(o, th, rng) } -> std::convertible_to<std::size_t>;
};

// What an environment hands back for one sampled action.
struct Outcome {
  double reward = 0.0;
  JudgmentLabel label = JudgmentLabel::Missing;
  bool abstained = false;
  std::string response_text;
};

template <class E, class P>
concept RewardSource =
    requires(const E& env, const typename E::Prompt& prompt, std::size_t a,
             Rng& rng) {
      typename E::Prompt;
      {
        env.observe(prompt)
      } -> std::convertible_to<typename P::Observation>;
      { env.respond(prompt, a, rng) } -> std::convertible_to<Outcome>;
    };

struct Rollout {
  std::string prompt_id;
  std::size_t group_id = 0;
  std::size_t action = 0;
  std::string response_text;
  double reward = 0.0;
  double old_log_prob = 0.0;
  double advantage = 0.0;
};

struct RolloutGroup {
  std::string prompt_id;
  std::vector<Rollout> rollouts;
};

struct StepStats {
  std::size_t step = 0;
  std::string stage;
  double mean_reward = 0.0;
  double attempt_rate = 0.0;
  double abstain_rate = 0.0;
  double zero_variance_fraction = 0.0;
  double mean_abs_gradient = 0.0;
  double mean_abs_surrogate_gradient = 0.0;
  double mean_kl = 0.0;
  std::vector<double> params;
};

inline void to_json(nlohmann::json& j, const StepStats& s) {
  j = nlohmann::json{{"step", s.step},
                     {"stage", s.stage},
                     {"mean_reward", s.mean_reward},
                     {"attempt_rate", s.attempt_rate},
                     {"abstain_rate", s.abstain_rate},
                     {"zero_variance_fraction", s.zero_variance_fraction},
                     {"mean_abs_gradient", s.mean_abs_gradient},
                     {"mean_abs_surrogate_gradient",
                      s.mean_abs_surrogate_gradient},
                     {"mean_kl", s.mean_kl},
                     {"params", s.params}};
}

inline void from_json(const nlohmann::json& j, StepStats& s) {
  j.at("step").get_to(s.step);
  j.at("stage").get_to(s.stage);
  j.at("mean_reward").get_to(s.mean_reward);
  j.at("attempt_rate").get_to(s.attempt_rate);
  j.at("abstain_rate").get_to(s.abstain_rate);
  j.at("zero_variance_fraction").get_to(s.zero_variance_fraction);
  j.at("mean_abs_gradient").get_to(s.mean_abs_gradient);
  j.at("mean_abs_surrogate_gradient").get_to(s.mean_abs_surrogate_gradient);
  j.at("mean_kl").get_to(s.mean_kl);
  j.at("params").get_to(s.params);
}

// (r - mean) / (population std + eps); a zero-variance group gets exact zeros.
inline std::vector<double> compute_advantages(std::span<const double> rewards,
                                              double std_epsilon) {
  if (rewards.size() < 2) throw data_error("degenerate group");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;
  std::vector<double> out(rewards.size(), 0.0);
  const double sd = std::sqrt(var);
  if (sd == 0.0) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i] = (rewards[i] - mean) / (sd + std_epsilon);
  }
  return out;
}

inline void compute_advantages(RolloutGroup& group, double std_epsilon) {
  std::vector<double> r;
  r.reserve(group.rollouts.size());
  for (const auto& ro : group.rollouts) r.push_back(ro.reward);
  const auto a = compute_advantages(r, std_epsilon);
  for (std::size_t i = 0; i < a.size(); ++i) group.rollouts[i].advantage = a[i];
}

inline double surrogate_term(double ratio, double advantage,
                             double clip_epsilon) {
  const double clipped =
      std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

// d/d(ratio) of surrogate_term: the unclipped branch contributes A, the
// clipped branch is flat.
inline double surrogate_ratio_derivative(double ratio, double advantage,
                                         double clip_epsilon) {
  const double clipped =
      std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

inline double kl_categorical(std::span<const double> p,
                             std::span<const double> q) {
  if (p.size() != q.size()) throw data_error("kl_categorical: support mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw data_error("unbounded KL");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

namespace detail {

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

inline std::string dump_vector(std::span<const double> v) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ']';
  return os.str();
}

}  // namespace detail

struct StepResult {
  Params params;
  StepStats stats;
  std::vector<RolloutGroup> groups;
};

// One GRPO update. Prompts are processed in order and each group is drawn
// sequentially from `rng`, so a fixed seed reproduces the step bit for bit.
// The objective ascended is
//   mean over rollouts of surrogate(ratio, A)  -  beta * mean over prompts of
//   KL(pi(.|o) || ref(.|o)).
// Rollouts are sampled from the current parameters, so ratios are 1 and the
// clip only matters if a caller supplies stale old_log_probs.
template <class Policy, class Env>
  requires PolicyInterface<Policy> && RewardSource<Env, Policy>
StepResult train_step(const Policy& policy, std::span<const double> params,
                      std::span<const double> ref_params,
                      std::span<const typename Env::Prompt> prompts,
                      const Env& env, const TrainerConfig& cfg, Rng& rng) {
  if (prompts.empty()) throw usage_error("train_step: no prompts");
  const std::size_t n_params = policy.num_params();
  if (params.size() != n_params || ref_params.size() != n_params) {
    throw usage_error("train_step: parameter vector has the wrong size");
  }
  const std::size_t G = cfg.group_size;

  StepResult out;
  out.groups.reserve(prompts.size());
  std::vector<double> g_surr(n_params, 0.0);
  std::vector<double> g_kl(n_params, 0.0);
  double reward_sum = 0.0;
  double kl_sum = 0.0;
  std::size_t attempts = 0;
  std::size_t zero_var = 0;

  for (std::size_t pi = 0; pi < prompts.size(); ++pi) {
    const auto& prompt = prompts[pi];
    const auto obs = env.observe(prompt);
    RolloutGroup group;
    group.rollouts.reserve(G);
    for (std::size_t g = 0; g < G; ++g) {
      Rollout ro;
      ro.group_id = pi;
      ro.action = policy.sample(obs, params, rng);
      ro.old_log_prob = policy.log_prob(ro.action, obs, params);
      Outcome oc = env.respond(prompt, ro.action, rng);
      ro.reward = oc.reward;
      ro.response_text = std::move(oc.response_text);
      reward_sum += ro.reward;
      if (!oc.abstained) ++attempts;
      group.rollouts.push_back(std::move(ro));
    }
    compute_advantages(group, cfg.std_epsilon);
    bool all_zero = true;
    for (const auto& ro : group.rollouts) {
      if (ro.advantage != 0.0) all_zero = false;
      const double ratio =
          std::exp(policy.log_prob(ro.action, obs, params) - ro.old_log_prob);
      const double d =
          surrogate_ratio_derivative(ratio, ro.advantage, cfg.clip_epsilon);
      if (d == 0.0) continue;
      const auto glp = policy.grad_log_prob(ro.action, obs, params);
      for (std::size_t k = 0; k < n_params; ++k) g_surr[k] += d * ratio * glp[k];
    }
    if (all_zero) ++zero_var;

    // grad KL(pi || q) = sum_a pi_a * grad log pi_a * (log pi_a - log q_a)
    const auto p = policy.action_distribution(obs, params);
    const auto q = policy.action_distribution(obs, ref_params);
    kl_sum += kl_categorical(p, q);
    if (cfg.kl_coef > 0.0) {
      for (std::size_t a = 0; a < p.size(); ++a) {
        if (p[a] <= 0.0) continue;
        const double w =
            p[a] * (policy.log_prob(a, obs, params) -
                    policy.log_prob(a, obs, ref_params));
        if (w == 0.0) continue;
        const auto glp = policy.grad_log_prob(a, obs, params);
        for (std::size_t k = 0; k < n_params; ++k) g_kl[k] += w * glp[k];
      }
    }
    out.groups.push_back(std::move(group));
  }

  const double n_rollouts = static_cast<double>(prompts.size() * G);
  const double n_prompts = static_cast<double>(prompts.size());
  std::vector<double> grad(n_params);
  double abs_total = 0.0, abs_surr = 0.0;
  for (std::size_t k = 0; k < n_params; ++k) {
    g_surr[k] /= n_rollouts;
    g_kl[k] /= n_prompts;
    grad[k] = g_surr[k] - cfg.kl_coef * g_kl[k];
    abs_total += std::abs(grad[k]);
    abs_surr += std::abs(g_surr[k]);
  }
  if (!detail::all_finite(grad)) {
    throw Error(ErrorKind::Numeric,
                "non-finite gradient: params=" + detail::dump_vector(params) +
                    " ref=" + detail::dump_vector(ref_params) +
                    " surrogate_grad=" + detail::dump_vector(g_surr) +
                    " kl_grad=" + detail::dump_vector(g_kl));
  }

  out.params.assign(params.begin(), params.end());
  for (std::size_t k = 0; k < n_params; ++k) {
    out.params[k] += cfg.learning_rate * grad[k];
  }
  if (!detail::all_finite(out.params)) {
    throw Error(ErrorKind::Numeric, "non-finite parameters after update: " +
                                        detail::dump_vector(out.params));
  }

  auto& s = out.stats;
  s.mean_reward = reward_sum / n_rollouts;
  s.attempt_rate = static_cast<double>(attempts) / n_rollouts;
  s.abstain_rate = 1.0 - s.attempt_rate;
  s.zero_variance_fraction = static_cast<double>(zero_var) / n_prompts;
  s.mean_abs_gradient = abs_total / static_cast<double>(n_params);
  s.mean_abs_surrogate_gradient = abs_surr / static_cast<double>(n_params);
  s.mean_kl = kl_sum / n_prompts;
  s.params = out.params;
  return out;
}

}  // namespace curriq
