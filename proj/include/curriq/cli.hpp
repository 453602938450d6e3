#pragma once

// Bodies of the curriq subcommands. Every command reads a RunConfig, writes
// its artifacts under cfg.out and is deterministic given the config and seed.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "curriq/config.hpp"
#include "curriq/curriculum.hpp"
#include "curriq/eval_core.hpp"
#include "curriq/grpo.hpp"
#include "curriq/ingest.hpp"
#include "curriq/io.hpp"
#include "curriq/retrieval.hpp"
#include "curriq/service.hpp"
#include "curriq/synthenv.hpp"

namespace curriq::cli {

namespace fs = std::filesystem;

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (unsigned char c : tag) h = (h ^ c) * 1099511628211ULL;
  // splitmix finalizer
  h ^= h >> 30;
  h *= 0xBF58476D1CE4E5B9ULL;
  h ^= h >> 27;
  h *= 0x94D049BB133111EBULL;
  h ^= h >> 31;
  return h;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline nlohmann::json metrics_json(const MetricsReport& m) {
  return {{"accuracy", m.accuracy},     {"missing", m.missing},
          {"hallucination", m.hallucination},
          {"acceptable", m.acceptable}, {"truthfulness", m.truthfulness},
          {"n_items", m.n_items},       {"n_turns", m.n_turns}};
}

// ---------------------------------------------------------------------------
// Backends

inline std::unique_ptr<Judge> make_judge(const RunConfig& cfg) {
  if (cfg.judge.kind == "builtin") return std::make_unique<BuiltinJudge>(cfg.eval);
  auto ep = endpoint_from_env(cfg.judge.endpoint, "CURRIQ_JUDGE_URL");
  if (!ep.configured()) throw usage_error("judge.kind is http but no url is set");
  return std::make_unique<HttpJudge>(ep);
}

inline std::unique_ptr<Embedder> make_embedder(const RunConfig& cfg) {
  if (cfg.embedder.kind == "builtin") {
    return std::make_unique<HashEmbedder>(cfg.embedding_dim);
  }
  auto ep = endpoint_from_env(cfg.embedder.endpoint, "CURRIQ_EMBEDDING_URL");
  if (!ep.configured()) {
    throw usage_error("retrieval.embedder.kind is http but no url is set");
  }
  return std::make_unique<HttpEmbedder>(ep);
}

inline std::unique_ptr<Reranker> make_reranker(const RunConfig& cfg) {
  if (cfg.reranker.kind == "builtin") return std::make_unique<JaccardReranker>();
  auto ep = endpoint_from_env(cfg.reranker.endpoint, "CURRIQ_RERANKER_URL");
  if (!ep.configured()) {
    throw usage_error("retrieval.reranker.kind is http but no url is set");
  }
  return std::make_unique<HttpReranker>(ep);
}

// ---------------------------------------------------------------------------
// ingest

struct IngestSummary {
  std::size_t queries = 0;
  std::size_t pages = 0;
  std::size_t chunks = 0;
  std::size_t summary_chunks = 0;
};

inline fs::path index_path(const RunConfig& cfg) {
  return cfg.out / (cfg.index_format == IndexFormat::Json ? "index.json" : "index.bin");
}

// Pages fetched for one query, in result order.
inline std::vector<RawPage> search_for(const RunConfig& cfg,
                                       const SearchFixture& fx,
                                       const std::string& query) {
  Rng rng(derive_seed(cfg.seed, "search:" + normalize_query(query)));
  return mock_search(query, fx, cfg.ingest.pages_per_query,
                     cfg.ingest.hard_negative_rate, rng);
}

inline IngestSummary cmd_ingest(const RunConfig& cfg, std::ostream& log = std::cout) {
  if (cfg.ingest.queries_fixture.empty() || cfg.ingest.hard_negatives_fixture.empty()) {
    throw usage_error("ingest needs ingest.queries_fixture and ingest.hard_negatives_fixture");
  }
  const auto fx = load_search_fixture(cfg.ingest.queries_fixture,
                                      cfg.ingest.hard_negatives_fixture);
  IngestSummary sum;
  std::map<std::string, RawPage> pages;  // by url, so shared pages index once
  nlohmann::json results = nlohmann::json::array();
  for (const auto& [key, entry] : fx.entries) {
    ++sum.queries;
    nlohmann::json urls = nlohmann::json::array();
    for (auto& p : search_for(cfg, fx, entry.query)) {
      urls.push_back(p.url);
      pages.emplace(p.url, std::move(p));
    }
    results.push_back({{"query", entry.query}, {"urls", urls}});
  }
  std::vector<Chunk> corpus;
  for (const auto& [url, p] : pages) {
    const auto main_text = extract_main_content(p.html);
    const auto summary = p.title.empty() ? p.snippet : p.title + ". " + p.snippet;
    auto chunks = segment(url, main_text, summary, cfg.ingest.chunk_tokens,
                          cfg.ingest.overlap_tokens);
    for (auto& c : chunks) {
      if (c.kind == ChunkKind::Summary) ++sum.summary_chunks;
      corpus.push_back(std::move(c));
    }
  }
  sum.pages = pages.size();
  sum.chunks = corpus.size();
  if (corpus.empty()) throw data_error("ingest produced no chunks");

  const LexicalIndex index(corpus);
  io::write_file(cfg.out / "corpus.jsonl", io::to_jsonl(corpus));
  std::string lines;
  for (const auto& r : results) lines += r.dump() + "\n";
  io::write_file(cfg.out / "search_results.jsonl", lines);
  if (cfg.index_format == IndexFormat::Json) {
    io::write_file(index_path(cfg), index.to_json().dump() + "\n");
  } else {
    std::ostringstream os(std::ios::binary);
    index.write_binary(os);
    io::write_file(index_path(cfg), os.str());
  }
  log << nlohmann::json{{"queries", sum.queries},
                        {"pages", sum.pages},
                        {"chunks", sum.chunks},
                        {"summary_chunks", sum.summary_chunks}}
             .dump()
      << '\n';
  return sum;
}

// ---------------------------------------------------------------------------
// retrieve

inline LexicalIndex load_index(const RunConfig& cfg) {
  const auto path = index_path(cfg);
  if (!fs::exists(path)) {
    throw data_error("no index at '" + path.string() + "'; run ingest first");
  }
  try {
    if (cfg.index_format == IndexFormat::Json) {
      return LexicalIndex::from_json(io::read_json(path));
    }
    std::istringstream is(io::read_file(path), std::ios::binary);
    return LexicalIndex::read_binary(is);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

// Loaded corpus plus the backends it was embedded with.
class LoadedRetriever {
 public:
  explicit LoadedRetriever(const RunConfig& cfg)
      : embedder_(make_embedder(cfg)),
        reranker_(make_reranker(cfg)),
        retriever_(io::read_jsonl<Chunk>(cfg.out / "corpus.jsonl"), load_index(cfg),
                   *embedder_, *reranker_, cfg.retrieval) {}

  const Retriever& get() const { return retriever_; }

 private:
  std::unique_ptr<Embedder> embedder_;
  std::unique_ptr<Reranker> reranker_;
  Retriever retriever_;
};

inline std::vector<ScoredChunk> cmd_retrieve(const RunConfig& cfg,
                                             const std::string& query,
                                             std::ostream& out = std::cout) {
  if (text::trim(query).empty()) throw usage_error("retrieve needs a non-empty query");
  const LoadedRetriever lr(cfg);
  auto ranked = lr.get().retrieve(query);
  for (const auto& s : ranked) {
    auto j = nlohmann::json(s);
    j["text"] = lr.get().chunk(s.chunk_id).text;
    out << j.dump() << '\n';
  }
  return ranked;
}

// ---------------------------------------------------------------------------
// label

struct LabelSummary {
  std::size_t easy = 0;
  std::size_t hard = 0;
};

inline LabelSummary cmd_label(const RunConfig& cfg, std::ostream& log = std::cout) {
  if (cfg.label.input.empty()) throw usage_error("label needs label.input");
  auto samples = io::read_jsonl<Sample>(cfg.label.input);
  if (samples.empty()) {
    throw data_error("'" + cfg.label.input.string() + "' contains no samples");
  }
  std::unique_ptr<ReferenceAnswerer> ref;
  if (cfg.label.reference == "oracle") {
    ref = std::make_unique<SyntheticOracleAnswerer>(derive_seed(cfg.seed, "label"));
  } else {
    if (cfg.label.reference_answers.empty()) {
      throw usage_error("label.reference is 'fixture' but label.reference_answers is unset");
    }
    std::unordered_map<std::string, std::string> answers;
    io::for_each_jsonl(cfg.label.reference_answers,
                       [&](const nlohmann::json& j, std::size_t) {
                         answers[j.at("id").get<std::string>()] =
                             j.at("answer").get<std::string>();
                       });
    ref = std::make_unique<FixtureAnswerer>(std::move(answers));
  }
  const auto judge = make_judge(cfg);
  std::vector<Sample> easy, hard;
  for (auto& s : samples) {
    s.difficulty = label_difficulty(s, *ref, *judge);
    (*s.difficulty == DifficultyLabel::Easy ? easy : hard).push_back(s);
  }
  io::write_file(cfg.out / "easy.jsonl", io::to_jsonl(easy));
  io::write_file(cfg.out / "hard.jsonl", io::to_jsonl(hard));
  const nlohmann::json summary = {{"easy", easy.size()}, {"hard", hard.size()}};
  io::write_file(cfg.out / "label_summary.json", summary.dump(2) + "\n");
  log << summary.dump() << '\n';
  return {easy.size(), hard.size()};
}

// ---------------------------------------------------------------------------
// train

struct SyntheticRun {
  ScheduleResult schedule;
  std::vector<MetricsReport> expected;  // closed-form, per stage
  MetricsReport initial;                // MC metrics before training
  OracleResult oracle;
};

inline std::vector<SyntheticQuestion> load_synthetic_pool(const fs::path& path,
                                                          PoolTag tag) {
  std::vector<SyntheticQuestion> out;
  io::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    const auto s = j.get<Sample>();
    if (!s.competence || !s.feature) {
      throw data_error("sample '" + s.id + "' needs competence and feature");
    }
    if (!(*s.competence >= 0.0 && *s.competence <= 1.0)) {
      throw data_error("sample '" + s.id + "' competence outside [0, 1]");
    }
    SyntheticQuestion q;
    q.id = s.id;
    q.competence = *s.competence;
    q.feature = *s.feature;
    q.ground_truth = s.ground_truth;
    q.pool_tag = s.difficulty ? (*s.difficulty == DifficultyLabel::Easy ? PoolTag::Easy
                                                                        : PoolTag::Hard)
                              : tag;
    out.push_back(std::move(q));
  });
  if (out.empty()) throw data_error("'" + path.string() + "' contains no samples");
  return out;
}

// Trains a ThresholdPolicy through `schedule` on the configured pools and
// evaluates each stage on the held-out pool.
inline SyntheticRun run_synthetic(const RunConfig& cfg, const Schedule& schedule,
                                  const std::function<void(const StepStats&)>& on_step = {}) {
  Pools pools;
  std::vector<SyntheticQuestion> eval_pool;
  if (!cfg.train.easy_pool.empty()) {
    pools.easy = load_synthetic_pool(cfg.train.easy_pool, PoolTag::Easy);
    pools.hard = load_synthetic_pool(cfg.train.hard_pool, PoolTag::Hard);
  } else {
    pools = generate_pools(cfg.env);
  }
  eval_pool = cfg.train.eval_pool.empty()
                  ? generate_eval_pool(cfg.env)
                  : load_synthetic_pool(cfg.train.eval_pool, PoolTag::Hard);

  const ThresholdPolicy policy;
  const SyntheticEnv env(cfg.rewards, cfg.eval);
  Rng train_rng(derive_seed(cfg.seed, "train"));
  Rng eval_rng(derive_seed(cfg.seed, "eval"));
  const Params init = {cfg.train.init_w, cfg.train.init_b};

  SyntheticRun run;
  run.oracle = oracle_threshold_truthfulness(eval_pool);
  run.initial = evaluate_policy_mc(init, eval_pool, cfg.train.eval_rollouts,
                                   eval_rng, cfg.eval);
  const auto evaluate = [&](const Params& p) {
    run.expected.push_back(expected_policy_metrics(p, eval_pool));
    return evaluate_policy_mc(p, eval_pool, cfg.train.eval_rollouts, eval_rng,
                              cfg.eval);
  };
  run.schedule = run_schedule<ThresholdPolicy, SyntheticEnv>(
      policy, init, env, std::span<const SyntheticQuestion>(pools.easy),
      std::span<const SyntheticQuestion>(pools.hard), schedule, evaluate,
      cfg.trainer, train_rng, on_step);
  return run;
}

inline SyntheticRun cmd_train(const RunConfig& cfg, std::ostream& log = std::cout) {
  auto run = run_synthetic(cfg, cfg.schedule);
  io::write_file(cfg.out / "trace.jsonl", io::to_jsonl(run.schedule.trace));
  nlohmann::json stages = nlohmann::json::array();
  for (std::size_t i = 0; i < run.schedule.stages.size(); ++i) {
    const auto& s = run.schedule.stages[i];
    stages.push_back({{"stage", s.name},
                      {"metrics", metrics_json(s.metrics)},
                      {"expected", metrics_json(run.expected[i])},
                      {"params", s.params}});
  }
  const nlohmann::json report = {
      {"initial", metrics_json(run.initial)},
      {"oracle",
       {{"threshold", run.oracle.threshold},
        {"value", run.oracle.value},
        {"informed_upper_bound", run.oracle.informed_upper_bound}}},
      {"stages", stages}};
  io::write_file(cfg.out / "stages.json", report.dump(2) + "\n");
  const auto& p = run.schedule.final_params;
  io::write_file(cfg.out / "params.json",
                 nlohmann::json{{"w", p[0]}, {"b", p[1]}}.dump(2) + "\n");
  for (const auto& s : run.schedule.stages) {
    log << nlohmann::json{{"stage", s.name}, {"metrics", metrics_json(s.metrics)}}.dump()
        << '\n';
  }
  return run;
}

// ---------------------------------------------------------------------------
// eval

// Rows: {conversation_id, turn, response, ground_truth[, question]} or
// {conversation_id, turn, label}. Conversations keep first-appearance order;
// turns are ordered by their turn number.
inline EvaluationReport cmd_eval(const RunConfig& cfg, const fs::path& responses,
                                 std::ostream& log = std::cout) {
  struct Row {
    std::size_t turn;
    Turn t;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> by_conv;
  std::unique_ptr<Judge> judge;
  io::for_each_jsonl(responses, [&](const nlohmann::json& j, std::size_t) {
    Row r;
    const auto cid = j.at("conversation_id").is_string()
                         ? j["conversation_id"].get<std::string>()
                         : j["conversation_id"].dump();
    r.turn = j.value("turn", std::size_t{0});
    r.t.question_id = j.value("question_id", cid + ":" + std::to_string(r.turn));
    r.t.response = j.value("response", std::string());
    if (j.contains("label")) {
      const auto l = parse_label(j["label"].get<std::string>());
      if (!l) throw data_error("unknown label '" + j["label"].get<std::string>() + "'");
      r.t.label = *l;
    } else {
      if (!j.contains("ground_truth")) {
        throw data_error("row needs either 'label' or 'ground_truth'");
      }
      if (!judge) judge = make_judge(cfg);
      r.t.label = judge->judge({j.value("question", std::string()),
                                j["ground_truth"].get<std::string>(), r.t.response});
    }
    auto [it, fresh] = by_conv.try_emplace(cid);
    if (fresh) order.push_back(cid);
    for (const auto& prev : it->second) {
      if (prev.turn == r.turn) {
        throw data_error("duplicate turn " + std::to_string(r.turn) +
                         " in conversation '" + cid + "'");
      }
    }
    it->second.push_back(std::move(r));
  });
  if (order.empty()) throw data_error("'" + responses.string() + "' contains no rows");
  std::vector<Conversation> convs;
  convs.reserve(order.size());
  for (const auto& cid : order) {
    auto& rows = by_conv[cid];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.turn < b.turn; });
    Conversation c{cid, {}};
    for (auto& r : rows) c.turns.push_back(std::move(r.t));
    convs.push_back(std::move(c));
  }
  auto report = evaluate_conversations(convs, cfg.eval);
  nlohmann::json per = nlohmann::json::array();
  std::string csv = "conversation_id,n_turns,score\n";
  for (const auto& c : report.conversations) {
    per.push_back({{"conversation_id", c.conversation_id},
                   {"n_turns", c.n_turns},
                   {"score", c.score}});
    csv += csv_field(c.conversation_id) + "," + std::to_string(c.n_turns) + "," +
           fmt_double(c.score) + "\n";
  }
  const nlohmann::json j = {{"metrics", metrics_json(report.metrics)},
                            {"conversations", per}};
  io::write_file(cfg.out / "eval_report.json", j.dump(2) + "\n");
  io::write_file(cfg.out / "eval_report.csv", csv);
  log << metrics_json(report.metrics).dump() << '\n';
  return report;
}

// ---------------------------------------------------------------------------
// report

inline nlohmann::json cmd_report(const RunConfig& cfg, const fs::path& run_dir,
                                 std::ostream& log = std::cout) {
  const auto trace_path = run_dir / "trace.jsonl";
  const auto stages_path = run_dir / "stages.json";
  if (!fs::exists(trace_path) || !fs::exists(stages_path)) {
    throw data_error("'" + run_dir.string() + "' has no trace.jsonl/stages.json; run train first");
  }
  const auto trace = io::read_jsonl<StepStats>(trace_path);
  const auto stages = io::read_json(stages_path);

  std::string steps_csv =
      "step,stage,mean_reward,attempt_rate,missing_rate,zero_variance_fraction,"
      "mean_abs_gradient,mean_abs_surrogate_gradient,mean_kl,w,b\n";
  for (const auto& s : trace) {
    steps_csv += std::to_string(s.step) + "," + csv_field(s.stage) + "," +
                 fmt_double(s.mean_reward) + "," + fmt_double(s.attempt_rate) + "," +
                 fmt_double(s.abstain_rate) + "," + fmt_double(s.zero_variance_fraction) +
                 "," + fmt_double(s.mean_abs_gradient) + "," +
                 fmt_double(s.mean_abs_surrogate_gradient) + "," + fmt_double(s.mean_kl);
    for (std::size_t k = 0; k < 2; ++k) {
      steps_csv += "," + (k < s.params.size() ? fmt_double(s.params[k]) : std::string());
    }
    steps_csv += "\n";
  }
  std::string stages_csv =
      "stage,accuracy,missing,hallucination,truthfulness,expected_truthfulness\n";
  nlohmann::json series = nlohmann::json::array();
  bool monotone = true;
  double prev = -2.0;
  try {
    for (const auto& s : stages.at("stages")) {
      const auto& m = s.at("metrics");
      const double tr = m.at("truthfulness").get<double>();
      stages_csv += csv_field(s.at("stage").get<std::string>()) + "," +
                    fmt_double(m.at("accuracy").get<double>()) + "," +
                    fmt_double(m.at("missing").get<double>()) + "," +
                    fmt_double(m.at("hallucination").get<double>()) + "," +
                    fmt_double(tr) + "," +
                    fmt_double(s.at("expected").at("truthfulness").get<double>()) + "\n";
      series.push_back({{"stage", s.at("stage")}, {"truthfulness", tr}});
      monotone = monotone && tr > prev;
      prev = tr;
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error(stages_path.string() + ": " + e.what());
  }
  const nlohmann::json report = {{"steps", trace.size()},
                                 {"stage_truthfulness", series},
                                 {"truthfulness_increasing", monotone}};
  io::write_file(cfg.out / "report_steps.csv", steps_csv);
  io::write_file(cfg.out / "report_stages.csv", stages_csv);
  io::write_file(cfg.out / "report.json", report.dump(2) + "\n");
  log << report.dump() << '\n';
  return report;
}

}  // namespace curriq::cli
