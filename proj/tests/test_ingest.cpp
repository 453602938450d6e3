#include <set>

#include <gtest/gtest.h>

#include "curriq/ingest.hpp"
#include "test_util.hpp"

using namespace curriq;
using curriq::testing::data_dir;
using curriq::testing::TempDir;

namespace {

RawPage page(const std::string& url, PageFlag flag) {
  RawPage p;
  p.url = url;
  p.title = url;
  p.html = "<p>" + url + "</p>";
  p.flag = flag;
  return p;
}

SearchFixture toy_fixture(std::size_t relevant, std::size_t specific,
                          std::size_t pool) {
  SearchFixture fx;
  FixtureEntry e;
  e.query = "Who built the Tesmar Bridge?";
  for (std::size_t i = 0; i < relevant; ++i) {
    e.pages.push_back(page("rel" + std::to_string(i), PageFlag::Relevant));
  }
  for (std::size_t i = 0; i < specific; ++i) {
    e.pages.push_back(page("specimen" + std::to_string(i), PageFlag::HardNegative));
  }
  fx.entries.emplace(normalize_query(e.query), e);
  for (std::size_t i = 0; i < pool; ++i) {
    fx.hard_negative_pool.push_back(page("pool" + std::to_string(i), PageFlag::HardNegative));
  }
  return fx;
}

std::size_t count_prefix(const std::vector<RawPage>& pages, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& p : pages) n += p.url.rfind(prefix, 0) == 0;
  return n;
}

}  // namespace

TEST(Extract, DropsBoilerplateKeepsDenseBlocks) {
  const std::string html =
      "<html><head><title>T</title></head><body>"
      "<nav><a href='/'>Home</a> <a href='/x'>Other</a></nav>"
      "<div><p>The first long paragraph carries the actual story text and is dense.</p>"
      "<p><a href='#'>x</a> <a href='#'>y</a> <a href='#'>z</a></p>"
      "<p>A second paragraph with <b>some</b> emphasis keeps its place because it is a good deal longer.</p></div>"
      "<footer>Copyright notice that is fairly long but always dropped.</footer>"
      "<script>var s = '<p>not text</p>';</script>"
      "</body></html>";
  const auto out = extract_main_content(html);
  EXPECT_EQ(out,
            "The first long paragraph carries the actual story text and is dense.\n\n"
            "A second paragraph with some emphasis keeps its place because it is a good deal longer.");
}

TEST(Extract, PlainTextPassesThrough) {
  EXPECT_EQ(extract_main_content("just words, 3 < 4"), "just words, 3 < 4");
  EXPECT_EQ(extract_main_content(""), "");
}

TEST(Extract, EntitiesAndWhitespace) {
  EXPECT_EQ(extract_main_content("<p>Fish &amp; chips&nbsp;&#233;&#x41;  \n here</p>"),
            "Fish & chips \xC3\xA9" "A here");
  EXPECT_EQ(html::decode_entities("&lt;b&gt; &unknown; &#0;"), "<b> &unknown; &#0;");
}

TEST(Extract, TolerantOfBrokenMarkup) {
  const auto out = extract_main_content(
      "<div><p>Unclosed paragraph one with enough text<p>and a second, somewhat longer one ending <i>here"
      "</div><!-- comment <p>hidden</p> -->");
  EXPECT_NE(out.find("Unclosed paragraph one"), std::string::npos);
  EXPECT_NE(out.find("longer one ending here"), std::string::npos);
  EXPECT_EQ(out.find("hidden"), std::string::npos);
}

TEST(Extract, Golden) {
  const auto html = io::read_file(data_dir() / "golden" / "article.html");
  const auto want = io::read_file(data_dir() / "golden" / "article.expected.txt");
  EXPECT_EQ(extract_main_content(html), std::string(text::trim(want)));
}

TEST(Segment, StrideAndOverlap) {
  std::string text;
  for (int i = 0; i < 10; ++i) text += "w" + std::to_string(i) + (i % 3 ? " " : ", ");
  const auto chunks = segment("u", text, "", 4, 1);
  // windows start at 0, 3, 6 and the last reaches the end
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].text, "w0, w1 w2 w3");
  EXPECT_EQ(chunks[1].text, "w3, w4 w5 w6");
  EXPECT_EQ(chunks[2].text, "w6, w7 w8 w9");
  EXPECT_EQ(chunks[0].chunk_id, "u#b0");
  EXPECT_EQ(chunks[2].chunk_id, "u#b2");
  for (const auto& c : chunks) EXPECT_EQ(c.token_count, 4u);
}

TEST(Segment, ShortTextAndSummary) {
  const auto chunks = segment("https://x", "a b c", "Title.  Snippet text", 256, 64);
  ASSERT_EQ(chunks.size(), 2u);
  EXPECT_EQ(chunks[0].kind, ChunkKind::Body);
  EXPECT_EQ(chunks[0].text, "a b c");
  EXPECT_EQ(chunks[1].kind, ChunkKind::Summary);
  EXPECT_EQ(chunks[1].chunk_id, "https://x#s");
  EXPECT_EQ(chunks[1].text, "Title. Snippet text");
  EXPECT_TRUE(segment("u", "", "").empty());
  EXPECT_THROW(segment("u", "a", "", 4, 4), Error);
}

TEST(Segment, CoversEveryTokenProperty) {
  for (std::size_t n : {1u, 5u, 17u, 100u}) {
    std::string text;
    for (std::size_t i = 0; i < n; ++i) text += "t" + std::to_string(i) + " ";
    for (std::size_t size : {2u, 7u, 32u}) {
      const auto chunks = segment("u", text, "", size, size / 2);
      std::set<std::string> seen;
      for (const auto& c : chunks) {
        EXPECT_LE(c.token_count, size);
        for (const auto& t : tokenize(c.text)) seen.insert(t);
      }
      EXPECT_EQ(seen.size(), n);
    }
  }
}

TEST(MockSearch, HardNegativeCountsAndOrder) {
  const auto fx = toy_fixture(3, 2, 10);
  Rng rng(1);
  const auto res = mock_search("who built the tesmar bridge", fx, 5, 0.5, rng);
  ASSERT_EQ(res.size(), 5u);
  // round(2.5) = 3 negatives, both query-specific ones first
  EXPECT_EQ(count_prefix(res, "rel"), 2u);
  EXPECT_EQ(count_prefix(res, "specimen"), 2u);
  EXPECT_EQ(count_prefix(res, "pool"), 1u);
  std::vector<std::string> rel;
  for (const auto& p : res) {
    if (p.url.rfind("rel", 0) == 0) rel.push_back(p.url);
  }
  EXPECT_EQ(rel, (std::vector<std::string>{"rel0", "rel1"}));
}

TEST(MockSearch, RateExtremes) {
  const auto fx = toy_fixture(3, 1, 10);
  Rng rng(2);
  const auto none = mock_search("Who built the Tesmar Bridge?", fx, 5, 0.0, rng);
  EXPECT_EQ(none.size(), 3u);  // only three relevant pages exist
  EXPECT_EQ(count_prefix(none, "rel"), 3u);
  const auto all = mock_search("Who built the Tesmar Bridge?", fx, 5, 1.0, rng);
  EXPECT_EQ(all.size(), 5u);
  EXPECT_EQ(count_prefix(all, "rel"), 0u);
  EXPECT_THROW(mock_search("q", fx, 5, 1.5, rng), Error);
}

TEST(MockSearch, UnknownQueryGetsNegatives) {
  const auto fx = toy_fixture(3, 1, 10);
  Rng rng(3);
  const auto res = mock_search("something else entirely", fx, 4, 0.5, rng);
  EXPECT_EQ(res.size(), 4u);
  EXPECT_EQ(count_prefix(res, "pool"), 4u);
}

TEST(MockSearch, SeedDeterminesInterleaving) {
  const auto fx = toy_fixture(3, 2, 10);
  Rng a(9), b(9);
  const auto r1 = mock_search("Who built the Tesmar Bridge?", fx, 5, 0.5, a);
  const auto r2 = mock_search("Who built the Tesmar Bridge?", fx, 5, 0.5, b);
  for (std::size_t i = 0; i < r1.size(); ++i) EXPECT_EQ(r1[i].url, r2[i].url);
}

TEST(Fixture, ShippedFixtureLoads) {
  const auto fx = load_search_fixture(data_dir() / "fixtures" / "search.jsonl",
                                      data_dir() / "fixtures" / "hard_negatives.jsonl");
  EXPECT_GE(fx.entries.size(), 30u);
  EXPECT_FALSE(fx.hard_negative_pool.empty());
  for (const auto& [key, e] : fx.entries) {
    EXPECT_FALSE(e.answer.empty()) << key;
    bool planted = false;
    for (const auto& p : e.pages) {
      if (p.flag == PageFlag::Relevant &&
          extract_main_content(p.html).find(e.answer) != std::string::npos) {
        planted = true;
      }
    }
    EXPECT_TRUE(planted) << key;
  }
}

TEST(Fixture, MalformedLineNamesFileAndLine) {
  TempDir dir;
  io::write_file(dir / "q.jsonl",
                 "{\"query\": \"a\", \"pages\": [{\"url\": \"u\"}]}\n{broken\n");
  io::write_file(dir / "n.jsonl", "");
  try {
    load_search_fixture(dir / "q.jsonl", dir / "n.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
    EXPECT_NE(std::string(e.what()).find("q.jsonl:2"), std::string::npos) << e.what();
  }
  io::write_file(dir / "empty.jsonl", "");
  EXPECT_THROW(load_search_fixture(dir / "empty.jsonl", dir / "n.jsonl"), Error);
}

TEST(Planner, Examples) {
  const BuiltinPlanner planner;
  const auto p1 = plan_queries("Who is the CEO of Norvik Motors?", "", planner);
  EXPECT_TRUE(p1.needs_search);
  ASSERT_EQ(p1.queries.size(), 2u);
  EXPECT_EQ(p1.queries[0], "Who is the CEO of Norvik Motors?");
  EXPECT_EQ(p1.queries[1], "norvik motors");

  const auto p2 = plan_queries("What colour is this car?", "", planner);
  EXPECT_FALSE(p2.needs_search);
  EXPECT_TRUE(p2.queries.empty());

  const auto p3 = plan_queries("12 * (3 + 4) = ?", "", planner);
  EXPECT_FALSE(p3.needs_search);

  const auto p4 = plan_queries("Is the RX100 made by Sony Group, and when did Apple Park open?",
                               "", planner);
  EXPECT_EQ(p4.queries.size(), 3u);
  EXPECT_EQ(p4.queries[1], "rx100");
  EXPECT_EQ(p4.queries[2], "sony group");

  EXPECT_FALSE(plan_queries("   ", "", planner).needs_search);
}

TEST(Planner, CapAndValidation) {
  PlannerConfig cfg;
  cfg.max_queries = 1;
  const BuiltinPlanner planner(cfg);
  EXPECT_EQ(plan_queries("Where is Apple Park located?", "", planner).queries.size(), 1u);
  EXPECT_THROW(validate_plan({true, {}}), Error);
  EXPECT_THROW(validate_plan({false, {"q"}}), Error);
  cfg.self_contained_patterns = {"("};
  EXPECT_THROW(cfg.validate(), Error);
}
