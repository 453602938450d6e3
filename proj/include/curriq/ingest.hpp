#pragma once

// Main-content extraction from HTML, token-window segmentation, the
// fixture-backed mock search client and the rule-based query planner.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "curriq/error.hpp"
#include "curriq/grpo.hpp"
#include "curriq/io.hpp"
#include "curriq/retrieval.hpp"
#include "curriq/text.hpp"

namespace curriq {

// ---------------------------------------------------------------------------
// Lenient HTML tree

namespace html {

struct Node {
  std::string tag;   // empty for text nodes
  std::string text;  // text nodes only
  std::vector<std::size_t> children;
};

inline bool is_void(std::string_view t) {
  static const std::unordered_set<std::string_view> v = {
      "area", "base", "br", "col", "embed", "hr", "img", "input",
      "link", "meta", "param", "source", "track", "wbr"};
  return v.count(t) != 0;
}

inline bool is_dropped(std::string_view t) {
  static const std::unordered_set<std::string_view> d = {
      "script", "style", "nav", "header", "footer", "aside", "form",
      "head", "noscript", "template", "svg", "iframe"};
  return d.count(t) != 0;
}

inline bool is_block(std::string_view t) {
  static const std::unordered_set<std::string_view> b = {
      "html", "body", "main", "article", "section", "div", "p", "li",
      "ul", "ol", "dl", "dd", "dt", "table", "tbody", "thead", "tr",
      "td", "th", "blockquote", "pre", "h1", "h2", "h3", "h4", "h5",
      "h6", "figure", "figcaption", "address", "details", "summary",
      "center", "#root"};
  return b.count(t) != 0;
}

// Elements that implicitly close an open element of the same name.
inline bool self_nesting_closes(std::string_view t) {
  return t == "p" || t == "li" || t == "dt" || t == "dd" || t == "tr" ||
         t == "td" || t == "th";
}

inline std::string decode_entities(std::string_view s) {
  static const std::map<std::string, std::string, std::less<>> named = {
      {"amp", "&"},   {"lt", "<"},       {"gt", ">"},      {"quot", "\""},
      {"apos", "'"},  {"nbsp", " "},     {"ndash", "-"},   {"mdash", "-"},
      {"hellip", "..."}, {"rsquo", "'"}, {"lsquo", "'"},   {"copy", "(c)"},
      {"ldquo", "\""}, {"rdquo", "\""}};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back('&');
      continue;
    }
    const auto name = s.substr(i + 1, semi - i - 1);
    if (!name.empty() && name[0] == '#') {
      char32_t cp = 0;
      bool ok = name.size() > 1;
      const bool hex = ok && (name[1] == 'x' || name[1] == 'X');
      for (std::size_t k = hex ? 2 : 1; ok && k < name.size(); ++k) {
        const char c = name[k];
        int d = -1;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        if (d < 0) ok = false;
        else cp = cp * (hex ? 16 : 10) + static_cast<char32_t>(d);
        if (cp > 0x10FFFF) ok = false;
      }
      if (ok && (hex ? name.size() > 2 : true) && cp != 0) {
        out += text::encode_utf8(std::u32string(1, cp));
        i = semi;
        continue;
      }
    } else if (const auto it = named.find(name); it != named.end()) {
      out += it->second;
      i = semi;
      continue;
    }
    out.push_back('&');
  }
  return out;
}

inline bool ascii_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// Case-insensitive search for "</name" starting at `from`.
inline std::size_t find_close(std::string_view s, std::string_view name,
                              std::size_t from) {
  const std::string needle = "</" + std::string(name);
  for (std::size_t i = from; i + needle.size() <= s.size(); ++i) {
    if (s[i] != '<') continue;
    if (lower_ascii(s.substr(i, needle.size())) == needle) return i;
  }
  return std::string_view::npos;
}

// Parses leniently into a tree rooted at node 0 ("#root"). Comments,
// doctypes, processing instructions and raw-text elements (script, style,
// textarea, title) are discarded while parsing; stray close tags are ignored.
class Document {
 public:
  explicit Document(std::string_view src) {
    nodes_.push_back({"#root", "", {}});
    std::vector<std::size_t> stack = {0};
    std::size_t i = 0;
    std::string pending;
    const auto flush = [&] {
      if (pending.empty()) return;
      Node n;
      n.text = decode_entities(pending);
      nodes_.push_back(std::move(n));
      nodes_[stack.back()].children.push_back(nodes_.size() - 1);
      pending.clear();
    };
    while (i < src.size()) {
      const char c = src[i];
      if (c != '<' || i + 1 >= src.size()) {
        pending.push_back(c);
        ++i;
        continue;
      }
      const char n1 = src[i + 1];
      if (src.substr(i, 4) == "<!--") {
        flush();
        const auto end = src.find("-->", i + 4);
        i = end == std::string_view::npos ? src.size() : end + 3;
        continue;
      }
      if (n1 == '!' || n1 == '?') {
        flush();
        const auto end = src.find('>', i);
        i = end == std::string_view::npos ? src.size() : end + 1;
        continue;
      }
      if (n1 == '/') {
        std::size_t j = i + 2;
        while (j < src.size() && (ascii_alpha(src[j]) || std::isdigit(static_cast<unsigned char>(src[j])))) ++j;
        const auto name = lower_ascii(src.substr(i + 2, j - i - 2));
        if (name.empty()) {
          pending.push_back(c);
          ++i;
          continue;
        }
        flush();
        const auto end = src.find('>', j);
        i = end == std::string_view::npos ? src.size() : end + 1;
        for (std::size_t k = stack.size(); k-- > 1;) {
          if (nodes_[stack[k]].tag == name) {
            stack.resize(k);
            break;
          }
        }
        continue;
      }
      if (!ascii_alpha(n1)) {
        pending.push_back(c);
        ++i;
        continue;
      }
      flush();
      std::size_t j = i + 1;
      while (j < src.size() && (ascii_alpha(src[j]) || std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '-')) ++j;
      const auto name = lower_ascii(src.substr(i + 1, j - i - 1));
      // Skip attributes, honoring quotes.
      char quote = 0;
      bool self_closing = false;
      while (j < src.size()) {
        const char d = src[j];
        if (quote) {
          if (d == quote) quote = 0;
        } else if (d == '"' || d == '\'') {
          quote = d;
        } else if (d == '>') {
          self_closing = j > 0 && src[j - 1] == '/';
          break;
        }
        ++j;
      }
      i = j < src.size() ? j + 1 : src.size();
      if (name == "script" || name == "style" || name == "textarea" ||
          name == "title") {
        const auto end = find_close(src, name, i);
        const auto stop = end == std::string_view::npos ? src.size() : end;
        i = stop;
        if (end != std::string_view::npos) {
          const auto gt = src.find('>', end);
          i = gt == std::string_view::npos ? src.size() : gt + 1;
        }
        continue;
      }
      if (is_void(name) || self_closing) {
        if (name == "br" || name == "hr") pending.push_back(' ');
        continue;
      }
      if (self_nesting_closes(name) && nodes_[stack.back()].tag == name) {
        stack.pop_back();
      }
      nodes_.push_back({name, "", {}});
      const auto id = nodes_.size() - 1;
      nodes_[stack.back()].children.push_back(id);
      stack.push_back(id);
    }
    flush();
  }

  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

inline std::string collapse_whitespace(std::string_view s) {
  std::u32string out;
  bool space = false;
  for (char32_t c : text::decode_utf8(s)) {
    if (text::is_space(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(U' ');
    space = false;
    out.push_back(c);
  }
  return text::encode_utf8(out);
}

}  // namespace html

inline bool looks_like_html(std::string_view s) {
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i] != '<') continue;
    const char c = s[i + 1];
    if (html::ascii_alpha(c) || c == '!' || c == '/' || c == '?') return true;
  }
  return false;
}

// Text-density extraction. Every text node belongs to its nearest block
// ancestor; a block's density is its text length divided by one plus the
// number of inline elements it owns. Blocks at or above half the maximum
// density are kept, in document order, separated by blank lines.
inline std::string extract_main_content(std::string_view input) {
  if (!looks_like_html(input)) return std::string(input);
  const html::Document doc(input);

  struct Block {
    std::string raw;
    std::size_t inline_elements = 0;
  };
  std::vector<Block> blocks;
  // Iterative preorder walk carrying the owning block index.
  struct Frame {
    std::size_t node;
    std::size_t block;
  };
  std::vector<Frame> work = {{0, 0}};
  blocks.push_back({});
  while (!work.empty()) {
    const auto [id, owner] = work.back();
    work.pop_back();
    const auto& n = doc.node(id);
    std::size_t block = owner;
    if (n.tag.empty()) {
      blocks[owner].raw += n.text;
      continue;
    }
    if (html::is_dropped(n.tag)) continue;
    if (id != 0 && html::is_block(n.tag)) {
      blocks.push_back({});
      block = blocks.size() - 1;
      blocks[owner].raw += ' ';
    } else if (id != 0) {
      ++blocks[owner].inline_elements;
    }
    for (std::size_t k = n.children.size(); k-- > 0;) {
      work.push_back({n.children[k], block});
    }
  }

  std::vector<std::pair<std::string, double>> scored;
  double best = 0.0;
  for (const auto& b : blocks) {
    auto t = html::collapse_whitespace(b.raw);
    if (t.empty()) continue;
    const double len = static_cast<double>(text::decode_utf8(t).size());
    const double density = len / (1.0 + static_cast<double>(b.inline_elements));
    best = std::max(best, density);
    scored.emplace_back(std::move(t), density);
  }
  std::string out;
  for (const auto& [t, d] : scored) {
    if (d < 0.5 * best) continue;
    if (!out.empty()) out += "\n\n";
    out += t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation

namespace detail {

struct TokenSpan {
  std::size_t begin;  // byte offsets into the source
  std::size_t end;
};

// Byte spans of the tokens produced by text::tokenize.
inline std::vector<TokenSpan> token_spans(std::string_view s) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  std::optional<std::size_t> start;
  while (i < s.size()) {
    const auto c0 = static_cast<unsigned char>(s[i]);
    std::size_t len = c0 < 0x80 ? 1 : (c0 >> 5) == 0x6 ? 2 : (c0 >> 4) == 0xE ? 3
                                       : (c0 >> 3) == 0x1E ? 4 : 1;
    if (i + len > s.size()) len = 1;
    const auto cps = text::decode_utf8(s.substr(i, len));
    const bool alnum = cps.size() == 1 && text::is_alnum(cps[0]);
    if (alnum && !start) start = i;
    if (!alnum && start) {
      out.push_back({*start, i});
      start.reset();
    }
    i += alnum ? len : (cps.size() == 1 ? len : 1);
  }
  if (start) out.push_back({*start, s.size()});
  return out;
}

}  // namespace detail

// Sliding windows of `chunk_tokens` tokens with stride chunk - overlap over
// the main text (each chunk keeps the original text between its first and
// last token), plus one summary chunk when the summary has any tokens.
inline std::vector<Chunk> segment(std::string_view source_url,
                                  std::string_view main_text,
                                  std::string_view summary,
                                  std::size_t chunk_tokens = 256,
                                  std::size_t overlap_tokens = 64) {
  if (!(chunk_tokens > overlap_tokens)) {
    throw usage_error("segment: chunk_tokens must exceed overlap_tokens");
  }
  std::vector<Chunk> out;
  const auto spans = detail::token_spans(main_text);
  const std::size_t stride = chunk_tokens - overlap_tokens;
  for (std::size_t start = 0, idx = 0; start < spans.size(); start += stride, ++idx) {
    const std::size_t end = std::min(start + chunk_tokens, spans.size());
    Chunk c;
    c.chunk_id = std::string(source_url) + "#b" + std::to_string(idx);
    c.source_url = std::string(source_url);
    c.kind = ChunkKind::Body;
    c.text = std::string(main_text.substr(
        spans[start].begin, spans[end - 1].end - spans[start].begin));
    c.token_count = end - start;
    out.push_back(std::move(c));
    if (end == spans.size()) break;
  }
  const auto summary_text = html::collapse_whitespace(summary);
  if (!tokenize(summary_text).empty()) {
    Chunk c;
    c.chunk_id = std::string(source_url) + "#s";
    c.source_url = std::string(source_url);
    c.kind = ChunkKind::Summary;
    c.text = summary_text;
    c.token_count = tokenize(summary_text).size();
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mock search

enum class PageFlag { Relevant, HardNegative };

struct RawPage {
  std::string url;
  std::string title;
  std::string snippet;
  std::string html;
  std::string last_updated;
  PageFlag flag = PageFlag::Relevant;
};

inline void to_json(nlohmann::json& j, const RawPage& p) {
  j = nlohmann::json{{"url", p.url},
                     {"title", p.title},
                     {"snippet", p.snippet},
                     {"html", p.html},
                     {"last_updated", p.last_updated},
                     {"flag", p.flag == PageFlag::Relevant ? "relevant"
                                                           : "hard_negative"}};
}

inline void from_json(const nlohmann::json& j, RawPage& p) {
  j.at("url").get_to(p.url);
  if (p.url.empty()) throw data_error("page has an empty url");
  p.title = j.value("title", std::string());
  p.snippet = j.value("snippet", std::string());
  p.html = j.value("html", std::string());
  p.last_updated = j.value("last_updated", std::string());
  const auto flag = j.value("flag", std::string("hard_negative"));
  if (flag == "relevant") {
    p.flag = PageFlag::Relevant;
  } else if (flag == "hard_negative") {
    p.flag = PageFlag::HardNegative;
  } else {
    throw data_error("unknown page flag '" + flag + "'");
  }
}

inline std::string normalize_query(std::string_view q) {
  std::string out;
  for (const auto& t : tokenize(q)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

struct FixtureEntry {
  std::string query;
  std::string answer;  // optional; marks the planted fact for tests
  std::vector<RawPage> pages;
};

struct SearchFixture {
  std::map<std::string, FixtureEntry> entries;  // keyed by normalized query
  std::vector<RawPage> hard_negative_pool;

  const FixtureEntry* find(std::string_view query) const {
    const auto it = entries.find(normalize_query(query));
    return it == entries.end() ? nullptr : &it->second;
  }
};

inline SearchFixture load_search_fixture(
    const std::filesystem::path& queries_path,
    const std::filesystem::path& hard_negatives_path) {
  SearchFixture fx;
  io::for_each_jsonl(queries_path, [&](const nlohmann::json& j, std::size_t) {
    FixtureEntry e;
    j.at("query").get_to(e.query);
    e.answer = j.value("answer", std::string());
    j.at("pages").get_to(e.pages);
    if (e.pages.empty()) throw data_error("query '" + e.query + "' has no pages");
    const auto key = normalize_query(e.query);
    if (key.empty()) throw data_error("empty query");
    if (!fx.entries.emplace(key, std::move(e)).second) {
      throw data_error("duplicate query '" + key + "'");
    }
  });
  io::for_each_jsonl(hard_negatives_path,
                     [&](const nlohmann::json& j, std::size_t) {
                       auto p = j.get<RawPage>();
                       p.flag = PageFlag::HardNegative;
                       fx.hard_negative_pool.push_back(std::move(p));
                     });
  if (fx.entries.empty()) {
    throw data_error("'" + queries_path.string() + "' contains no queries");
  }
  return fx;
}

namespace detail {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = std::min(
        static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)), i - 1);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace detail

// Up to k pages: round(k * rate) hard negatives (query-specific ones first,
// then the shared pool) and the query's relevant pages for the remaining
// slots, merged in a seed-determined interleaving that keeps the relevant
// pages in fixture order. Unknown queries get k hard negatives.
inline std::vector<RawPage> mock_search(std::string_view query,
                                        const SearchFixture& fixture,
                                        std::size_t k, double hard_negative_rate,
                                        Rng& rng) {
  if (!(hard_negative_rate >= 0.0 && hard_negative_rate <= 1.0)) {
    throw usage_error("hard_negative_rate must lie in [0, 1]");
  }
  const FixtureEntry* entry = fixture.find(query);
  std::vector<const RawPage*> relevant, negatives, pool;
  if (entry) {
    for (const auto& p : entry->pages) {
      (p.flag == PageFlag::Relevant ? relevant : negatives).push_back(&p);
    }
  }
  for (const auto& p : fixture.hard_negative_pool) pool.push_back(&p);
  detail::shuffle(negatives, rng);
  detail::shuffle(pool, rng);
  negatives.insert(negatives.end(), pool.begin(), pool.end());

  std::size_t n_hn = entry ? static_cast<std::size_t>(
                                 std::llround(static_cast<double>(k) * hard_negative_rate))
                           : k;
  n_hn = std::min({n_hn, k, negatives.size()});
  const std::size_t n_rel = std::min(relevant.size(), k - std::min(k, n_hn));

  std::vector<bool> slots(n_rel + n_hn, false);
  std::fill(slots.begin() + static_cast<std::ptrdiff_t>(n_rel), slots.end(), true);
  detail::shuffle(slots, rng);
  std::vector<RawPage> out;
  out.reserve(slots.size());
  std::size_t ri = 0, hi = 0;
  for (bool hn : slots) out.push_back(hn ? *negatives[hi++] : *relevant[ri++]);
  return out;
}

// ---------------------------------------------------------------------------
// Query planning

struct QueryPlan {
  bool needs_search = false;
  std::vector<std::string> queries;
};

inline void validate_plan(const QueryPlan& plan) {
  if (plan.needs_search == plan.queries.empty()) {
    throw data_error("query plan: queries must be non-empty iff needs_search");
  }
}

struct PlannerConfig {
  std::vector<std::string> self_contained_patterns = {
      R"(\bwhat colou?r is (this|that|it)\b)",
      R"(\b(read|what does) (the|this) (text|sign|label)\b)",
      R"(\bhow many\b.*\b(in|on) (this|the) (image|picture|photo)\b)",
      R"(^\s*(what is|calculate|compute)?\s*[-0-9+*/x().\s]*[0-9][-0-9+*/x().\s]*[=?\s]*$)"};
  std::size_t max_queries = 3;

  void validate() const {
    if (max_queries < 1) throw usage_error("planner.max_queries must be >= 1");
    for (const auto& p : self_contained_patterns) {
      try {
        std::regex re(p, std::regex::icase);
      } catch (const std::regex_error&) {
        throw usage_error("planner: invalid pattern '" + p + "'");
      }
    }
  }
};

class QueryPlanner {
 public:
  virtual ~QueryPlanner() = default;
  virtual QueryPlan plan(const std::string& question,
                         const std::string& context) const = 0;
};

namespace detail {

inline bool has_letter_and_digit(std::string_view w) {
  bool letter = false, digit = false;
  for (char c : w) {
    if (c >= '0' && c <= '9') digit = true;
    if (html::ascii_alpha(c)) letter = true;
  }
  return letter && digit;
}

inline bool is_capitalized(std::string_view w) {
  const auto cps = text::decode_utf8(w);
  return !cps.empty() && text::to_lower(cps[0]) != cps[0];
}

inline bool is_function_word(std::string_view w) {
  static const std::unordered_set<std::string> stop = {
      "who", "what", "when", "where", "which", "why", "how", "is", "are",
      "was", "were", "does", "do", "did", "can", "could", "the", "a", "an",
      "in", "of", "this", "that", "these", "those", "i", "tell", "name"};
  return stop.count(text::lowercase(w)) != 0;
}

inline std::string strip_punct(std::string_view w) {
  const auto keep = [](char32_t c) { return text::is_alnum(c); };
  auto cps = text::decode_utf8(w);
  std::size_t b = 0, e = cps.size();
  while (b < e && !keep(cps[b])) ++b;
  while (e > b && !keep(cps[e - 1])) --e;
  return text::encode_utf8(cps.substr(b, e - b));
}

// Maximal runs of capitalized or model-number words. A run counts when it has
// at least two words or contains a model number.
inline std::vector<std::string> salient_phrases(std::string_view question) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : question) {
    if (c == ' ' || c == '\t' || c == '\n') {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(cur);

  std::vector<std::string> out;
  std::vector<std::string> run;
  bool run_has_model = false;
  const auto close_run = [&] {
    if (run.size() >= 2 || run_has_model) {
      std::string phrase;
      for (const auto& w : run) {
        if (!phrase.empty()) phrase += ' ';
        phrase += w;
      }
      out.push_back(phrase);
    }
    run.clear();
    run_has_model = false;
  };
  for (const auto& raw : words) {
    const auto w = strip_punct(raw);
    const bool model = has_letter_and_digit(w);
    const bool cap = is_capitalized(w) && !is_function_word(w);
    if (!w.empty() && (model || cap)) {
      run.push_back(w);
      run_has_model = run_has_model || model;
    } else {
      close_run();
    }
    // Sentence punctuation after a word ends the run.
    if (!raw.empty() && (raw.back() == ',' || raw.back() == '?' ||
                         raw.back() == '.' || raw.back() == ';')) {
      close_run();
    }
  }
  close_run();
  return out;
}

}  // namespace detail

// Self-contained questions skip search. Otherwise the question itself plus
// one lowercased query per salient phrase, deduplicated, capped.
class BuiltinPlanner final : public QueryPlanner {
 public:
  explicit BuiltinPlanner(PlannerConfig cfg = {}) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (const auto& p : cfg_.self_contained_patterns) {
      patterns_.emplace_back(p, std::regex::icase);
    }
  }

  QueryPlan plan(const std::string& question,
                 const std::string& /*context*/) const override {
    QueryPlan out;
    const auto q = std::string(text::trim(question));
    if (q.empty()) return out;
    const auto lower = text::lowercase(q);
    for (const auto& re : patterns_) {
      if (std::regex_search(lower, re)) return out;
    }
    std::unordered_set<std::string> seen;
    const auto add = [&](const std::string& s) {
      if (out.queries.size() >= cfg_.max_queries) return;
      const auto key = normalize_query(s);
      if (key.empty() || !seen.insert(key).second) return;
      out.queries.push_back(s);
    };
    add(q);
    for (const auto& phrase : detail::salient_phrases(q)) {
      add(text::lowercase(phrase));
    }
    out.needs_search = !out.queries.empty();
    return out;
  }

 private:
  PlannerConfig cfg_;
  std::vector<std::regex> patterns_;
};

inline QueryPlan plan_queries(const std::string& question,
                              const std::string& context,
                              const QueryPlanner& planner) {
  auto plan = planner.plan(question, context);
  validate_plan(plan);
  return plan;
}

}  // namespace curriq
