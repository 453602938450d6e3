#pragma once

// Easy/hard difficulty labeling, per-stage mixed sampling and the staged
// training loop.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "curriq/error.hpp"
#include "curriq/eval_core.hpp"
#include "curriq/grpo.hpp"

namespace curriq {

enum class DifficultyLabel { Easy, Hard };

inline std::string_view to_string(DifficultyLabel d) {
  return d == DifficultyLabel::Easy ? "easy" : "hard";
}

struct StageConfig {
  std::string name;
  std::size_t easy_parts = 1;
  std::size_t hard_parts = 0;
  std::size_t steps = 1;

  double easy_probability() const {
    return static_cast<double>(easy_parts) /
           static_cast<double>(easy_parts + hard_parts);
  }

  void validate() const {
    if (easy_parts + hard_parts < 1) {
      throw usage_error("stage '" + name + "': easy_parts + hard_parts must be >= 1");
    }
  }
};

struct Schedule {
  std::vector<StageConfig> stages = {{"stage1", 1, 0, 100},
                                     {"stage2", 1, 1, 100},
                                     {"stage3", 1, 2, 100}};

  void validate() const {
    if (stages.empty()) throw usage_error("schedule has no stages");
    for (const auto& s : stages) s.validate();
  }

  Schedule reversed() const {
    Schedule r;
    r.stages.assign(stages.rbegin(), stages.rend());
    return r;
  }
};

// A labeled or unlabeled training sample; the synthetic fields are present
// only for samples exported from the synthetic environment.
struct Sample {
  std::string id;
  std::string question;
  std::string ground_truth;
  std::optional<DifficultyLabel> difficulty;
  std::optional<double> competence;
  std::optional<double> feature;
};

inline void to_json(nlohmann::json& j, const Sample& s) {
  j = nlohmann::json{{"id", s.id},
                     {"question", s.question},
                     {"ground_truth", s.ground_truth}};
  if (s.difficulty) j["difficulty"] = std::string(to_string(*s.difficulty));
  if (s.competence) j["competence"] = *s.competence;
  if (s.feature) j["feature"] = *s.feature;
}

inline void from_json(const nlohmann::json& j, Sample& s) {
  j.at("id").get_to(s.id);
  s.question = j.value("question", std::string());
  j.at("ground_truth").get_to(s.ground_truth);
  s.difficulty.reset();
  if (j.contains("difficulty") && !j["difficulty"].is_null()) {
    const auto d = j["difficulty"].get<std::string>();
    if (d == "easy") {
      s.difficulty = DifficultyLabel::Easy;
    } else if (d == "hard") {
      s.difficulty = DifficultyLabel::Hard;
    } else {
      throw data_error("unknown difficulty '" + d + "'");
    }
  }
  s.competence.reset();
  s.feature.reset();
  if (j.contains("competence")) s.competence = j["competence"].get<double>();
  if (j.contains("feature")) s.feature = j["feature"].get<double>();
}

// Plug point for the model whose success defines "easy".
class ReferenceAnswerer {
 public:
  virtual ~ReferenceAnswerer() = default;
  virtual std::string answer(const Sample& sample) const = 0;
};

// Precomputed answers keyed by sample id.
class FixtureAnswerer final : public ReferenceAnswerer {
 public:
  explicit FixtureAnswerer(std::unordered_map<std::string, std::string> answers)
      : answers_(std::move(answers)) {}

  std::string answer(const Sample& sample) const override {
    const auto it = answers_.find(sample.id);
    if (it == answers_.end()) {
      throw data_error("no reference answer for sample '" + sample.id + "'");
    }
    return it->second;
  }

 private:
  std::unordered_map<std::string, std::string> answers_;
};

// Answers correctly with the sample's competence. The draw is keyed on
// (seed, id) so labels do not depend on processing order.
class SyntheticOracleAnswerer final : public ReferenceAnswerer {
 public:
  explicit SyntheticOracleAnswerer(std::uint64_t seed) : seed_(seed) {}

  std::string answer(const Sample& sample) const override {
    if (!sample.competence) {
      throw data_error("synthetic oracle needs a competence for sample '" +
                       sample.id + "'");
    }
    std::uint64_t h = 1469598103934665603ULL ^ seed_;
    for (unsigned char c : sample.id) h = (h ^ c) * 1099511628211ULL;
    Rng rng(h);
    return uniform01(rng) < *sample.competence ? sample.ground_truth
                                                : "I don't know";
  }

 private:
  std::uint64_t seed_;
};

// Easy iff the reference answer is judged Perfect.
inline DifficultyLabel label_difficulty(const Sample& sample,
                                        const ReferenceAnswerer& reference,
                                        const Judge& judge) {
  const auto response = reference.answer(sample);
  const auto label =
      judge.judge({sample.question, sample.ground_truth, response});
  return label == JudgmentLabel::Perfect ? DifficultyLabel::Easy
                                         : DifficultyLabel::Hard;
}

// Each slot picks the easy pool with probability easy/(easy+hard), then a
// uniform element with replacement.
template <class T>
std::vector<T> stage_sampler(std::span<const T> easy_pool,
                             std::span<const T> hard_pool,
                             const StageConfig& stage, std::size_t batch_size,
                             Rng& rng) {
  stage.validate();
  if (stage.easy_parts > 0 && easy_pool.empty()) {
    throw data_error("stage '" + stage.name + "' needs the easy pool, which is empty");
  }
  if (stage.hard_parts > 0 && hard_pool.empty()) {
    throw data_error("stage '" + stage.name + "' needs the hard pool, which is empty");
  }
  const double pe = stage.easy_probability();
  std::vector<T> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const bool easy = uniform01(rng) < pe;
    const auto& pool = easy ? easy_pool : hard_pool;
    const auto idx = static_cast<std::size_t>(
        uniform01(rng) * static_cast<double>(pool.size()));
    out.push_back(pool[std::min(idx, pool.size() - 1)]);
  }
  return out;
}

struct StageResult {
  std::string name;
  MetricsReport metrics;
  Params params;
};

struct ScheduleResult {
  std::vector<StageResult> stages;
  std::vector<StepStats> trace;
  Params final_params;
};

// Runs each stage's steps with its sampler, then snapshots `evaluate(params)`.
// Parameters carry across stages; the reference is refreshed at each stage
// boundary when cfg.ref_refresh is PerStage.
template <class Policy, class Env, class Evaluate>
  requires PolicyInterface<Policy> && RewardSource<Env, Policy>
ScheduleResult run_schedule(
    const Policy& policy, Params params, const Env& env,
    std::span<const typename Env::Prompt> easy_pool,
    std::span<const typename Env::Prompt> hard_pool, const Schedule& schedule,
    Evaluate&& evaluate, const TrainerConfig& cfg, Rng& rng,
    const std::function<void(const StepStats&)>& on_step = {}) {
  schedule.validate();
  cfg.validate();
  ScheduleResult out;
  Params ref = params;
  std::size_t global_step = 0;
  for (const auto& stage : schedule.stages) {
    if (cfg.ref_refresh == RefRefresh::PerStage) ref = params;
    for (std::size_t t = 0; t < stage.steps; ++t) {
      const auto batch = stage_sampler<typename Env::Prompt>(
          easy_pool, hard_pool, stage, cfg.prompts_per_step, rng);
      auto step = train_step<Policy, Env>(
          policy, params, ref, std::span<const typename Env::Prompt>(batch),
          env, cfg, rng);
      params = std::move(step.params);
      step.stats.step = global_step++;
      step.stats.stage = stage.name;
      if (on_step) on_step(step.stats);
      out.trace.push_back(std::move(step.stats));
    }
    out.stages.push_back({stage.name, evaluate(std::as_const(params)), params});
  }
  out.final_params = params;
  return out;
}

}  // namespace curriq
