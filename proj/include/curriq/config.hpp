#pragma once

// RunConfig: one JSON document with a section per module. Unknown keys and
// out-of-range values are rejected with the dotted path of the field.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curriq/curriculum.hpp"
#include "curriq/error.hpp"
#include "curriq/eval_core.hpp"
#include "curriq/grpo.hpp"
#include "curriq/ingest.hpp"
#include "curriq/io.hpp"
#include "curriq/retrieval.hpp"
#include "curriq/rewards.hpp"
#include "curriq/service.hpp"
#include "curriq/synthenv.hpp"

namespace curriq {

enum class IndexFormat { Json, Binary };

struct BackendConfig {
  std::string kind = "builtin";  // builtin | http
  ServiceEndpoint endpoint;
};

struct IngestConfig {
  std::filesystem::path queries_fixture;
  std::filesystem::path hard_negatives_fixture;
  std::size_t pages_per_query = 5;
  double hard_negative_rate = 0.5;
  std::size_t chunk_tokens = 256;
  std::size_t overlap_tokens = 64;
};

struct LabelConfig {
  std::filesystem::path input;
  std::string reference = "oracle";  // oracle | fixture
  std::filesystem::path reference_answers;
};

struct TrainConfig {
  std::filesystem::path easy_pool;  // empty: generate synthetic pools
  std::filesystem::path hard_pool;
  std::filesystem::path eval_pool;
  double init_w = 0.0;
  double init_b = 1.0;
  std::size_t eval_rollouts = 16;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  bool strict = false;
  EvalConfig eval;
  RewardConfig rewards;
  TrainerConfig trainer;
  Schedule schedule;
  EnvConfig env;
  bool env_seed_set = false;
  RetrievalConfig retrieval;
  std::size_t embedding_dim = 256;
  BackendConfig embedder;
  BackendConfig reranker;
  BackendConfig judge;
  IndexFormat index_format = IndexFormat::Json;
  IngestConfig ingest;
  PlannerConfig planner;
  LabelConfig label;
  TrainConfig train;

  // The master seed feeds the trainer and, unless env.seed is given, the
  // synthetic pools.
  void set_seed(std::uint64_t s) {
    seed = s;
    trainer.seed = s;
    if (!env_seed_set) env.seed = s;
  }

  void validate() const {
    eval.validate();
    rewards.validate();
    trainer.validate();
    schedule.validate();
    env.validate();
    retrieval.validate();
    planner.validate();
    if (embedding_dim < 1) throw usage_error("retrieval.embedder.dim must be >= 1");
    for (const auto* b : {&embedder, &reranker, &judge}) {
      if (b->kind != "builtin" && b->kind != "http") {
        throw usage_error("backend kind must be 'builtin' or 'http', got '" +
                          b->kind + "'");
      }
    }
    embedder.endpoint.validate("retrieval.embedder");
    reranker.endpoint.validate("retrieval.reranker");
    judge.endpoint.validate("judge");
    if (!(ingest.chunk_tokens > ingest.overlap_tokens)) {
      throw usage_error("ingest.chunk_tokens must exceed ingest.overlap_tokens");
    }
    if (ingest.pages_per_query < 1) {
      throw usage_error("ingest.pages_per_query must be >= 1");
    }
    if (!(ingest.hard_negative_rate >= 0.0 && ingest.hard_negative_rate <= 1.0)) {
      throw usage_error("ingest.hard_negative_rate must lie in [0, 1]");
    }
    if (label.reference != "oracle" && label.reference != "fixture") {
      throw usage_error("label.reference must be 'oracle' or 'fixture'");
    }
    if (train.easy_pool.empty() != train.hard_pool.empty()) {
      throw usage_error("train.easy_pool and train.hard_pool go together");
    }
    if (train.eval_rollouts < 1) {
      throw usage_error("train.eval_rollouts must be >= 1");
    }
  }
};

namespace detail {

// Reads fields from one JSON object, remembering which keys were consumed so
// that leftovers can be reported as unknown.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw usage_error(where() + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw usage_error(field(key) + " has the wrong type");
    }
  }

  void get_path(const char* key, std::filesystem::path& out,
                const std::filesystem::path& base) {
    std::string s;
    if (!j_.contains(key)) return;
    get(key, s);
    out = s.empty() ? std::filesystem::path() : resolve(base, s);
  }

  Section sub(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), field(key));
  }

  const nlohmann::json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string field(const char* key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw usage_error("unknown config key '" + field(k.c_str()) + "'");
    }
  }

  static std::filesystem::path resolve(const std::filesystem::path& base,
                                       const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_endpoint(Section& s, ServiceEndpoint& ep) {
  s.get("url", ep.url);
  s.get("timeout_ms", ep.timeout_ms);
  s.get("retries", ep.retries);
}

inline void read_backend(Section s, BackendConfig& b, std::size_t* dim = nullptr) {
  s.get("kind", b.kind);
  read_endpoint(s, b.endpoint);
  if (dim) s.get("dim", *dim);
  s.finish();
}

}  // namespace detail

// `base` resolves relative file paths (normally the config file's directory).
inline RunConfig parse_run_config(const nlohmann::json& j,
                                  const std::filesystem::path& base = {}) {
  using detail::Section;
  RunConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  if (root.has("out")) root.get_path("out", c.out, base);
  root.get("strict", c.strict);

  if (root.has("eval")) {
    auto s = root.sub("eval");
    s.get("acceptable_score", c.eval.acceptable_score);
    s.get("termination_run_length", c.eval.termination_run_length);
    s.get("refusal_patterns", c.eval.refusal_patterns);
    std::string match = "substring", agg = "macro";
    s.get("match", match);
    s.get("aggregation", agg);
    if (match == "substring") c.eval.match = MatchPolicy::Substring;
    else if (match == "exact") c.eval.match = MatchPolicy::Exact;
    else throw usage_error("eval.match must be 'substring' or 'exact'");
    if (agg == "macro") c.eval.aggregation = Aggregation::Macro;
    else if (agg == "micro") c.eval.aggregation = Aggregation::Micro;
    else throw usage_error("eval.aggregation must be 'macro' or 'micro'");
    s.finish();
  }
  if (root.has("rewards")) {
    auto s = root.sub("rewards");
    s.get("format_weight", c.rewards.format_weight);
    s.get("answer_weight", c.rewards.answer_weight);
    s.get("acceptable_reward", c.rewards.acceptable_reward);
    s.finish();
  }
  if (root.has("trainer")) {
    auto s = root.sub("trainer");
    s.get("group_size", c.trainer.group_size);
    s.get("clip_epsilon", c.trainer.clip_epsilon);
    s.get("kl_coef", c.trainer.kl_coef);
    s.get("std_epsilon", c.trainer.std_epsilon);
    s.get("learning_rate", c.trainer.learning_rate);
    s.get("prompts_per_step", c.trainer.prompts_per_step);
    std::string refresh = "per_stage";
    s.get("ref_refresh", refresh);
    if (refresh == "per_stage") c.trainer.ref_refresh = RefRefresh::PerStage;
    else if (refresh == "never") c.trainer.ref_refresh = RefRefresh::Never;
    else throw usage_error("trainer.ref_refresh must be 'per_stage' or 'never'");
    s.finish();
  }
  if (root.has("schedule")) {
    const auto& arr = root.raw("schedule");
    if (!arr.is_array()) throw usage_error("schedule must be an array");
    c.schedule.stages.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Section s(arr[i], "schedule[" + std::to_string(i) + "]");
      StageConfig st;
      st.name = "stage" + std::to_string(i + 1);
      s.get("name", st.name);
      s.get("easy_parts", st.easy_parts);
      s.get("hard_parts", st.hard_parts);
      s.get("steps", st.steps);
      s.finish();
      c.schedule.stages.push_back(std::move(st));
    }
  }
  if (root.has("env")) {
    auto s = root.sub("env");
    s.get("easy_alpha", c.env.easy_alpha);
    s.get("easy_beta", c.env.easy_beta);
    s.get("hard_alpha", c.env.hard_alpha);
    s.get("hard_beta", c.env.hard_beta);
    s.get("obs_noise", c.env.obs_noise);
    s.get("easy_pool_size", c.env.easy_pool_size);
    s.get("hard_pool_size", c.env.hard_pool_size);
    s.get("eval_easy_size", c.env.eval_easy_size);
    s.get("eval_hard_size", c.env.eval_hard_size);
    if (s.has("seed")) {
      s.get("seed", c.env.seed);
      c.env_seed_set = true;
    }
    s.finish();
  }
  if (root.has("retrieval")) {
    auto s = root.sub("retrieval");
    if (s.has("bm25")) {
      auto b = s.sub("bm25");
      b.get("k1", c.retrieval.bm25.k1);
      b.get("b", c.retrieval.bm25.b);
      b.finish();
    }
    if (s.has("fusion")) {
      auto f = s.sub("fusion");
      f.get("w_embed", c.retrieval.fusion.w_embed);
      f.get("w_bm25", c.retrieval.fusion.w_bm25);
      f.get("w_tfidf", c.retrieval.fusion.w_tfidf);
      f.finish();
    }
    s.get("coarse_m", c.retrieval.coarse_m);
    s.get("final_k", c.retrieval.final_k);
    if (s.has("embedder")) detail::read_backend(s.sub("embedder"), c.embedder, &c.embedding_dim);
    if (s.has("reranker")) detail::read_backend(s.sub("reranker"), c.reranker);
    std::string fmt = "json";
    s.get("index_format", fmt);
    if (fmt == "json") c.index_format = IndexFormat::Json;
    else if (fmt == "binary") c.index_format = IndexFormat::Binary;
    else throw usage_error("retrieval.index_format must be 'json' or 'binary'");
    s.finish();
  }
  if (root.has("judge")) detail::read_backend(root.sub("judge"), c.judge);
  if (root.has("ingest")) {
    auto s = root.sub("ingest");
    s.get_path("queries_fixture", c.ingest.queries_fixture, base);
    s.get_path("hard_negatives_fixture", c.ingest.hard_negatives_fixture, base);
    s.get("pages_per_query", c.ingest.pages_per_query);
    s.get("hard_negative_rate", c.ingest.hard_negative_rate);
    s.get("chunk_tokens", c.ingest.chunk_tokens);
    s.get("overlap_tokens", c.ingest.overlap_tokens);
    s.finish();
  }
  if (root.has("planner")) {
    auto s = root.sub("planner");
    s.get("self_contained_patterns", c.planner.self_contained_patterns);
    s.get("max_queries", c.planner.max_queries);
    s.finish();
  }
  if (root.has("label")) {
    auto s = root.sub("label");
    s.get_path("input", c.label.input, base);
    s.get("reference", c.label.reference);
    s.get_path("reference_answers", c.label.reference_answers, base);
    s.finish();
  }
  if (root.has("train")) {
    auto s = root.sub("train");
    s.get_path("easy_pool", c.train.easy_pool, base);
    s.get_path("hard_pool", c.train.hard_pool, base);
    s.get_path("eval_pool", c.train.eval_pool, base);
    s.get("init_w", c.train.init_w);
    s.get("init_b", c.train.init_b);
    s.get("eval_rollouts", c.train.eval_rollouts);
    s.finish();
  }
  root.finish();
  c.set_seed(c.seed);
  c.retrieval.strict = c.strict;
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw usage_error(path.string() + ": invalid JSON: " + e.what());
  } catch (const Error& e) {
    throw usage_error(e.what());
  }
  return parse_run_config(j, path.parent_path());
}

}  // namespace curriq
