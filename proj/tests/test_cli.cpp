#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "curriq/cli.hpp"
#include "test_util.hpp"

using namespace curriq;
using curriq::testing::data_dir;
using curriq::testing::TempDir;
namespace fs = std::filesystem;

namespace {

fs::path default_config() { return data_dir() / ".." / "configs" / "default.json"; }

RunConfig base_config(const fs::path& out) {
  auto cfg = load_run_config(default_config());
  cfg.out = out;
  return cfg;
}

// Small synthetic run so train tests stay fast.
RunConfig small_train_config(const fs::path& out) {
  auto cfg = base_config(out);
  for (auto& st : cfg.schedule.stages) st.steps = 4;
  cfg.env.easy_pool_size = 60;
  cfg.env.hard_pool_size = 120;
  cfg.env.eval_easy_size = 50;
  cfg.env.eval_hard_size = 100;
  cfg.train.eval_rollouts = 2;
  return cfg;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CURRIQ_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Ingest, GoldenCountsAndDeterminism) {
  TempDir a, b;
  std::ostringstream log;
  const auto sum = cli::cmd_ingest(base_config(a.path()), log);
  const auto golden = io::read_json(data_dir() / "golden" / "ingest_counts.json");
  EXPECT_EQ(sum.queries, golden.at("queries").get<std::size_t>());
  EXPECT_EQ(sum.pages, golden.at("pages").get<std::size_t>());
  EXPECT_EQ(sum.chunks, golden.at("chunks").get<std::size_t>());
  EXPECT_EQ(sum.summary_chunks, golden.at("summary_chunks").get<std::size_t>());
  EXPECT_EQ(nlohmann::json::parse(log.str()), golden);

  cli::cmd_ingest(base_config(b.path()), log);
  for (const char* f : {"corpus.jsonl", "search_results.jsonl", "index.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Ingest, MissingFixtureIsDataError) {
  TempDir dir;
  auto cfg = base_config(dir.path());
  cfg.ingest.queries_fixture = dir / "nothing.jsonl";
  try {
    cli::cmd_ingest(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
  }
}

TEST(Retrieve, PlantedChunkAndUnknownQuery) {
  TempDir dir;
  auto cfg = base_config(dir.path());
  cfg.index_format = IndexFormat::Binary;
  std::ostringstream log;
  cli::cmd_ingest(cfg, log);
  EXPECT_TRUE(fs::exists(dir / "index.bin"));

  std::ostringstream out;
  const auto top = cli::cmd_retrieve(cfg, "How long is the Calder Bridge?", out);
  ASSERT_EQ(top.size(), 5u);
  bool planted = false;
  std::istringstream lines(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"chunk_id", "bm25", "tfidf", "embed", "fused", "rerank", "text"}) {
      EXPECT_TRUE(j.contains(k)) << k;
    }
    const auto answer = load_search_fixture(cfg.ingest.queries_fixture,
                                            cfg.ingest.hard_negatives_fixture)
                            .find("How long is the Calder Bridge?")
                            ->answer;
    planted = planted || j["text"].get<std::string>().find(answer) != std::string::npos;
    ++n;
  }
  EXPECT_EQ(n, 5u);
  EXPECT_TRUE(planted);

  std::ostringstream other;
  EXPECT_EQ(cli::cmd_retrieve(cfg, "completely unrelated zebra question", other).size(), 5u);
  EXPECT_THROW(cli::cmd_retrieve(cfg, "   ", other), Error);
}

TEST(Retrieve, NoIndexIsDataError) {
  TempDir dir;
  try {
    cli::cmd_retrieve(base_config(dir.path()), "q");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
  }
}

TEST(Label, FixtureAnswersDeterministic) {
  TempDir a, b;
  std::ostringstream log;
  const auto s = cli::cmd_label(base_config(a.path()), log);
  // every third reference answer is wrong or a refusal
  EXPECT_EQ(s.easy + s.hard, 34u);
  EXPECT_EQ(s.hard, 11u);
  cli::cmd_label(base_config(b.path()), log);
  EXPECT_EQ(slurp(a / "easy.jsonl"), slurp(b / "easy.jsonl"));
  EXPECT_EQ(slurp(a / "hard.jsonl"), slurp(b / "hard.jsonl"));
  const auto first = nlohmann::json::parse(slurp(a / "easy.jsonl").substr(
      0, slurp(a / "easy.jsonl").find('\n')));
  EXPECT_EQ(first.at("difficulty"), "easy");
}

TEST(Label, OracleOnSyntheticPoolTracksCompetence) {
  TempDir dir;
  EnvConfig env;
  env.seed = 5;
  env.easy_pool_size = 400;
  env.hard_pool_size = 400;
  const auto pools = generate_pools(env);
  std::string lines;
  double mean_p = 0;
  for (const auto* pool : {&pools.easy, &pools.hard}) {
    for (const auto& q : *pool) {
      lines += nlohmann::json(Sample{q.id, "", q.ground_truth, {}, q.competence, q.feature})
                   .dump() + "\n";
      mean_p += q.competence;
    }
  }
  mean_p /= 800;
  io::write_file(dir / "pool.jsonl", lines);
  auto cfg = base_config(dir / "out");
  cfg.label.input = dir / "pool.jsonl";
  cfg.label.reference = "oracle";
  std::ostringstream log;
  const auto s = cli::cmd_label(cfg, log);
  EXPECT_NEAR(static_cast<double>(s.easy) / 800.0, mean_p, 0.05);
  // Easy-pool samples are labeled easy far more often than hard-pool ones.
  std::size_t easy_from_easy = 0;
  io::for_each_jsonl(dir / "out" / "easy.jsonl", [&](const nlohmann::json& j, std::size_t) {
    easy_from_easy += j.at("id").get<std::string>()[0] == 'e';
  });
  EXPECT_GT(easy_from_easy, 250u);
}

TEST(Label, EmptyInputIsDataError) {
  TempDir dir;
  io::write_file(dir / "empty.jsonl", "");
  auto cfg = base_config(dir / "out");
  cfg.label.input = dir / "empty.jsonl";
  EXPECT_THROW(cli::cmd_label(cfg), Error);
}

TEST(Train, WritesArtifactsDeterministically) {
  TempDir a, b;
  std::ostringstream log;
  cli::cmd_train(small_train_config(a.path()), log);
  cli::cmd_train(small_train_config(b.path()), log);
  for (const char* f : {"trace.jsonl", "stages.json", "params.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto stages = io::read_json(a / "stages.json");
  EXPECT_EQ(stages.at("stages").size(), 3u);
  EXPECT_EQ(io::read_jsonl<StepStats>(a / "trace.jsonl").size(), 12u);

  auto other = small_train_config(b.path());
  other.set_seed(8);
  cli::cmd_train(other, log);
  EXPECT_NE(slurp(a / "trace.jsonl"), slurp(b / "trace.jsonl"));
}

TEST(Train, ZeroStepsKeepsInitialPolicy) {
  TempDir dir;
  auto cfg = small_train_config(dir.path());
  for (auto& st : cfg.schedule.stages) st.steps = 0;
  std::ostringstream log;
  const auto run = cli::cmd_train(cfg, log);
  EXPECT_TRUE(run.schedule.trace.empty());
  const Params init = {cfg.train.init_w, cfg.train.init_b};
  const auto eval_pool = generate_eval_pool(cfg.env);
  const auto want = expected_policy_metrics(init, eval_pool);
  for (std::size_t i = 0; i < run.schedule.stages.size(); ++i) {
    EXPECT_EQ(run.schedule.stages[i].params, init);
    EXPECT_EQ(run.expected[i].truthfulness, want.truthfulness);
  }
}

TEST(Train, CorruptPoolNamesLine) {
  TempDir dir;
  io::write_file(dir / "easy.jsonl",
                 "{\"id\": \"a\", \"ground_truth\": \"x\", \"competence\": 0.9, \"feature\": 1}\n"
                 "{\"id\": \"b\", \"ground_truth\": \"y\"}\n");
  io::write_file(dir / "hard.jsonl",
                 "{\"id\": \"c\", \"ground_truth\": \"z\", \"competence\": 0.1, \"feature\": -1}\n");
  auto cfg = small_train_config(dir / "out");
  cfg.train.easy_pool = dir / "easy.jsonl";
  cfg.train.hard_pool = dir / "hard.jsonl";
  try {
    cli::cmd_train(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
    EXPECT_NE(std::string(e.what()).find("easy.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(Eval, LabelFractionFiles) {
  TempDir dir;
  const auto cfg = base_config(dir.path());
  std::ostringstream log;
  const auto a = cli::cmd_eval(cfg, data_dir() / "eval" / "labels_no_curriculum.jsonl", log);
  EXPECT_NEAR(a.metrics.truthfulness, -0.521, 0.002);
  const auto b = cli::cmd_eval(cfg, data_dir() / "eval" / "labels_curriculum.jsonl", log);
  EXPECT_NEAR(b.metrics.truthfulness, -0.239, 0.002);
  const auto m = cli::cmd_eval(cfg, data_dir() / "eval" / "labels_all_missing.jsonl", log);
  EXPECT_EQ(m.metrics.missing, 1.0);
  EXPECT_EQ(m.metrics.accuracy, 0.0);
  EXPECT_EQ(m.metrics.hallucination, 0.0);
  EXPECT_EQ(m.metrics.truthfulness, 0.0);
}

TEST(Eval, MultiTurnResponses) {
  TempDir dir;
  std::ostringstream log;
  const auto r = cli::cmd_eval(base_config(dir.path()),
                               data_dir() / "eval" / "multiturn_responses.jsonl", log);
  ASSERT_EQ(r.conversations.size(), 2u);
  EXPECT_EQ(r.conversations[0].conversation_id, "bridge");
  EXPECT_DOUBLE_EQ(r.conversations[0].score, -0.25);
  EXPECT_DOUBLE_EQ(r.conversations[1].score, 0.5);
  EXPECT_DOUBLE_EQ(r.metrics.truthfulness, 0.125);
  const auto csv = slurp(dir / "eval_report.csv");
  EXPECT_EQ(csv, "conversation_id,n_turns,score\nbridge,4,-0.25\nmayor,2,0.5\n");
}

TEST(Eval, TurnOrderAndDuplicates) {
  TempDir dir;
  io::write_file(dir / "r.jsonl",
                 "{\"conversation_id\": \"x\", \"turn\": 2, \"label\": \"perfect\"}\n"
                 "{\"conversation_id\": \"x\", \"turn\": 0, \"label\": \"incorrect\"}\n"
                 "{\"conversation_id\": \"x\", \"turn\": 1, \"label\": \"incorrect\"}\n");
  std::ostringstream log;
  const auto r = cli::cmd_eval(base_config(dir / "out"), dir / "r.jsonl", log);
  EXPECT_DOUBLE_EQ(r.conversations[0].score, -2.0 / 3.0);
  io::write_file(dir / "dup.jsonl",
                 "{\"conversation_id\": \"x\", \"turn\": 0, \"label\": \"perfect\"}\n"
                 "{\"conversation_id\": \"x\", \"turn\": 0, \"label\": \"missing\"}\n");
  EXPECT_THROW(cli::cmd_eval(base_config(dir / "out"), dir / "dup.jsonl", log), Error);
  io::write_file(dir / "bad.jsonl", "{\"conversation_id\": \"x\", \"label\": \"great\"}\n");
  EXPECT_THROW(cli::cmd_eval(base_config(dir / "out"), dir / "bad.jsonl", log), Error);
}

TEST(Report, FromTrainRun) {
  TempDir run, rep1, rep2;
  std::ostringstream log;
  cli::cmd_train(small_train_config(run.path()), log);
  const auto j = cli::cmd_report(small_train_config(rep1.path()), run.path(), log);
  cli::cmd_report(small_train_config(rep2.path()), run.path(), log);
  EXPECT_EQ(j.at("steps"), 12);
  EXPECT_EQ(j.at("stage_truthfulness").size(), 3u);
  for (const char* f : {"report_steps.csv", "report_stages.csv", "report.json"}) {
    EXPECT_EQ(slurp(rep1 / f), slurp(rep2 / f)) << f;
  }
  const auto steps = slurp(rep1 / "report_steps.csv");
  EXPECT_EQ(steps.substr(0, steps.find('\n')),
            "step,stage,mean_reward,attempt_rate,missing_rate,zero_variance_fraction,"
            "mean_abs_gradient,mean_abs_surrogate_gradient,mean_kl,w,b");
  EXPECT_EQ(std::count(steps.begin(), steps.end(), '\n'), 13);
}

TEST(Report, EmptyDirIsDataError) {
  TempDir run, out;
  EXPECT_THROW(cli::cmd_report(base_config(out.path()), run.path()), Error);
}

TEST(Binary, ExitCodes) {
  TempDir dir;
  const auto cfg = default_config().string();
  EXPECT_EQ(run_cli("--config " + cfg + " --out " + (dir / "o").string() + " eval " +
                    (data_dir() / "eval" / "labels_all_missing.jsonl").string()),
            0);
  EXPECT_EQ(run_cli("--config " + cfg + " nosuchcommand"), 1);
  EXPECT_EQ(run_cli("--config " + (dir / "missing.json").string() + " train"), 1);
  io::write_file(dir / "unknown.json", R"({"trainer": {"lr": 1}})");
  EXPECT_EQ(run_cli("--config " + (dir / "unknown.json").string() + " train"), 1);
  EXPECT_EQ(run_cli("--config " + cfg + " --out " + (dir / "o").string() + " eval " +
                    (dir / "nope.jsonl").string()),
            2);
  io::write_file(dir / "http.json",
                 R"({"judge": {"kind": "http", "url": "http://127.0.0.1:1/judge",
                     "timeout_ms": 300, "retries": 0}})");
  io::write_file(dir / "rows.jsonl",
                 "{\"conversation_id\": \"a\", \"turn\": 0, \"response\": \"x\", "
                 "\"ground_truth\": \"y\"}\n");
  EXPECT_EQ(run_cli("--config " + (dir / "http.json").string() + " --out " +
                    (dir / "o").string() + " eval " + (dir / "rows.jsonl").string()),
            3);
}
