#include <gtest/gtest.h>

#include "curriq/config.hpp"
#include "test_util.hpp"

using namespace curriq;
using curriq::testing::TempDir;

namespace {

std::string usage_message(const nlohmann::json& j) {
  try {
    parse_run_config(j);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Usage);
    EXPECT_EQ(exit_code_for(e.kind()), 1);
    return e.what();
  }
  ADD_FAILURE() << "accepted: " << j.dump();
  return {};
}

}  // namespace

TEST(Config, DefaultsFromEmptyObject) {
  const auto c = parse_run_config(nlohmann::json::object());
  EXPECT_EQ(c.trainer.group_size, 8u);
  EXPECT_EQ(c.schedule.stages.size(), 3u);
  EXPECT_EQ(c.retrieval.coarse_m, 20u);
  EXPECT_EQ(c.retrieval.final_k, 5u);
  EXPECT_EQ(c.embedder.kind, "builtin");
}

TEST(Config, UnknownKeysNameTheirPath) {
  EXPECT_NE(usage_message({{"sede", 1}}).find("'sede'"), std::string::npos);
  EXPECT_NE(usage_message({{"trainer", {{"group_sise", 4}}}}).find("trainer.group_sise"),
            std::string::npos);
  EXPECT_NE(usage_message({{"retrieval", {{"bm25", {{"k2", 1}}}}}}).find("retrieval.bm25.k2"),
            std::string::npos);
  EXPECT_NE(usage_message({{"schedule", {{{"name", "a"}, {"stepz", 3}}}}})
                .find("schedule[0].stepz"),
            std::string::npos);
  EXPECT_NE(usage_message({{"retrieval", {{"embedder", {{"dimension", 3}}}}}})
                .find("retrieval.embedder.dimension"),
            std::string::npos);
}

TEST(Config, OutOfRangeAndWrongTypes) {
  usage_message({{"trainer", {{"group_size", 1}}}});
  usage_message({{"trainer", {{"clip_epsilon", 1.5}}}});
  usage_message({{"trainer", {{"learning_rate", "fast"}}}});
  usage_message({{"eval", {{"match", "fuzzy"}}}});
  usage_message({{"retrieval", {{"final_k", 50}}}});
  usage_message({{"ingest", {{"hard_negative_rate", 2.0}}}});
  usage_message({{"ingest", {{"chunk_tokens", 10}, {"overlap_tokens", 10}}}});
  usage_message({{"schedule", nlohmann::json::array()}});
  usage_message({{"schedule", {{{"easy_parts", 0}, {"hard_parts", 0}}}}});
  usage_message({{"judge", {{"kind", "magic"}}}});
  usage_message({{"judge", {{"kind", "http"}, {"url", "https://x"}}}});
  usage_message({{"train", {{"easy_pool", "e.jsonl"}}}});
  usage_message({{"eval", 3}});
}

TEST(Config, SeedPropagation) {
  auto c = parse_run_config({{"seed", 11}});
  EXPECT_EQ(c.trainer.seed, 11u);
  EXPECT_EQ(c.env.seed, 11u);
  c.set_seed(12);
  EXPECT_EQ(c.env.seed, 12u);
  auto pinned = parse_run_config({{"seed", 11}, {"env", {{"seed", 3}}}});
  pinned.set_seed(99);
  EXPECT_EQ(pinned.env.seed, 3u);
  EXPECT_EQ(pinned.trainer.seed, 99u);
}

TEST(Config, RelativePathsResolveAgainstConfigFile) {
  TempDir dir;
  std::filesystem::create_directories(dir / "conf");
  io::write_file(dir / "conf" / "run.json",
                 R"({"out": "../runs/a", "label": {"input": "samples.jsonl"},
                     "ingest": {"queries_fixture": "/abs/q.jsonl"}})");
  const auto c = load_run_config(dir / "conf" / "run.json");
  EXPECT_EQ(c.out, dir / "conf" / "../runs/a");
  EXPECT_EQ(c.label.input, dir / "conf" / "samples.jsonl");
  EXPECT_EQ(c.ingest.queries_fixture, "/abs/q.jsonl");
}

TEST(Config, FileErrorsAreUsageErrors) {
  TempDir dir;
  io::write_file(dir / "bad.json", "{ nope");
  EXPECT_THROW(load_run_config(dir / "bad.json"), Error);
  try {
    load_run_config(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Usage);
  }
}

TEST(Config, ShippedDefaultValidates) {
  const auto c = load_run_config(std::filesystem::path(CURRIQ_DATA_DIR) / ".." / "configs" /
                                 "default.json");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.schedule.stages.size(), 3u);
  EXPECT_TRUE(std::filesystem::exists(c.ingest.queries_fixture));
  EXPECT_TRUE(std::filesystem::exists(c.label.reference_answers));
}
