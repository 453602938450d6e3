#pragma once

// Lexical index with BM25 and TF-IDF scoring, embedding similarity, min-max
// score fusion for coarse ranking, and a pluggable reranker.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "curriq/error.hpp"
#include "curriq/text.hpp"

namespace curriq {

using text::tokenize;

enum class ChunkKind { Body, Summary };

inline std::string_view to_string(ChunkKind k) {
  return k == ChunkKind::Body ? "body" : "summary";
}

struct Chunk {
  std::string chunk_id;
  std::string source_url;
  ChunkKind kind = ChunkKind::Body;
  std::string text;
  std::size_t token_count = 0;
};

inline void to_json(nlohmann::json& j, const Chunk& c) {
  j = nlohmann::json{{"chunk_id", c.chunk_id},
                     {"source_url", c.source_url},
                     {"kind", std::string(to_string(c.kind))},
                     {"text", c.text},
                     {"token_count", c.token_count}};
}

inline void from_json(const nlohmann::json& j, Chunk& c) {
  j.at("chunk_id").get_to(c.chunk_id);
  c.source_url = j.value("source_url", std::string());
  const auto kind = j.value("kind", std::string("body"));
  if (kind == "body") {
    c.kind = ChunkKind::Body;
  } else if (kind == "summary") {
    c.kind = ChunkKind::Summary;
  } else {
    throw data_error("unknown chunk kind '" + kind + "'");
  }
  j.at("text").get_to(c.text);
  c.token_count = tokenize(c.text).size();
  if (c.text.empty()) throw data_error("chunk '" + c.chunk_id + "' has empty text");
}

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  void validate() const {
    if (!(k1 > 0.0)) throw usage_error("retrieval.bm25.k1 must be > 0");
    if (!(b >= 0.0 && b <= 1.0)) {
      throw usage_error("retrieval.bm25.b must lie in [0, 1]");
    }
  }
};

struct FusionWeights {
  double w_embed = 0.5;
  double w_bm25 = 0.3;
  double w_tfidf = 0.2;

  void validate() const {
    if (!(w_embed >= 0.0 && w_bm25 >= 0.0 && w_tfidf >= 0.0)) {
      throw usage_error("retrieval.fusion weights must be >= 0");
    }
    if (!(w_embed + w_bm25 + w_tfidf > 0.0)) {
      throw usage_error("retrieval.fusion weights must not all be zero");
    }
  }
};

struct ScoredChunk {
  std::string chunk_id;
  double bm25 = 0.0;
  double tfidf = 0.0;
  double embed = 0.0;
  double fused = 0.0;
  std::optional<double> rerank;
};

inline void to_json(nlohmann::json& j, const ScoredChunk& s) {
  j = nlohmann::json{{"chunk_id", s.chunk_id},
                     {"bm25", s.bm25},
                     {"tfidf", s.tfidf},
                     {"embed", s.embed},
                     {"fused", s.fused}};
  j["rerank"] = s.rerank ? nlohmann::json(*s.rerank) : nlohmann::json(nullptr);
}

// ---------------------------------------------------------------------------
// Lexical index

class LexicalIndex {
 public:
  LexicalIndex() = default;

  explicit LexicalIndex(std::span<const Chunk> chunks) {
    for (const auto& c : chunks) {
      std::map<std::string, std::uint32_t> tf;
      const auto toks = tokenize(c.text);
      for (const auto& t : toks) ++tf[t];
      add(c.chunk_id, toks.size(), std::move(tf));
    }
    finalize();
  }

  std::size_t size() const { return ids_.size(); }
  double avgdl() const { return avgdl_; }
  const std::string& chunk_id(std::size_t row) const { return ids_[row]; }
  std::size_t length(std::size_t row) const { return lengths_[row]; }
  const std::map<std::string, std::uint32_t>& term_freqs(std::size_t row) const {
    return tf_[row];
  }

  std::size_t df(const std::string& term) const {
    const auto it = df_.find(term);
    return it == df_.end() ? 0 : it->second;
  }

  std::size_t row(const std::string& chunk_id) const {
    const auto it = rows_.find(chunk_id);
    if (it == rows_.end()) {
      throw data_error("chunk '" + chunk_id + "' is not in the index");
    }
    return it->second;
  }

  bool contains(const std::string& chunk_id) const {
    return rows_.count(chunk_id) != 0;
  }

  // BM25 idf with the +1 inside the log, so it is never negative.
  double bm25_idf(const std::string& term) const {
    const double n = static_cast<double>(size());
    const double d = static_cast<double>(df(term));
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
  }

  // TF-IDF idf; zero for unseen terms.
  double tfidf_idf(const std::string& term) const {
    const auto d = df(term);
    if (d == 0) return 0.0;
    return std::log(1.0 + static_cast<double>(size()) / static_cast<double>(d));
  }

  double chunk_tfidf_norm(std::size_t row) const { return norms_[row]; }

  // Persistence. JSON keeps term maps readable; binary is compact.
  nlohmann::json to_json() const {
    nlohmann::json chunks = nlohmann::json::array();
    for (std::size_t i = 0; i < size(); ++i) {
      nlohmann::json tf = nlohmann::json::object();
      for (const auto& [t, c] : tf_[i]) tf[t] = c;
      chunks.push_back({{"chunk_id", ids_[i]}, {"length", lengths_[i]}, {"tf", tf}});
    }
    return {{"format", "curriq-index"}, {"version", kVersion}, {"chunks", chunks}};
  }

  static LexicalIndex from_json(const nlohmann::json& j) {
    if (j.value("format", std::string()) != "curriq-index") {
      throw data_error("not a curriq index file");
    }
    if (j.value("version", 0) != kVersion) {
      throw data_error("unsupported index version");
    }
    LexicalIndex idx;
    for (const auto& c : j.at("chunks")) {
      std::map<std::string, std::uint32_t> tf;
      for (const auto& [t, v] : c.at("tf").items()) tf[t] = v.get<std::uint32_t>();
      idx.add(c.at("chunk_id").get<std::string>(),
              c.at("length").get<std::size_t>(), std::move(tf));
    }
    idx.finalize();
    return idx;
  }

  void write_binary(std::ostream& os) const {
    os.write(kMagic, 4);
    put_u64(os, kVersion);
    put_u64(os, size());
    for (std::size_t i = 0; i < size(); ++i) {
      put_str(os, ids_[i]);
      put_u64(os, lengths_[i]);
      put_u64(os, tf_[i].size());
      for (const auto& [t, c] : tf_[i]) {
        put_str(os, t);
        put_u64(os, c);
      }
    }
  }

  static LexicalIndex read_binary(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
      throw data_error("not a curriq binary index");
    }
    if (get_u64(is) != kVersion) throw data_error("unsupported index version");
    LexicalIndex idx;
    const auto n = get_u64(is);
    for (std::uint64_t i = 0; i < n; ++i) {
      auto id = get_str(is);
      const auto len = get_u64(is);
      const auto nt = get_u64(is);
      std::map<std::string, std::uint32_t> tf;
      for (std::uint64_t k = 0; k < nt; ++k) {
        auto t = get_str(is);
        tf[std::move(t)] = static_cast<std::uint32_t>(get_u64(is));
      }
      idx.add(std::move(id), len, std::move(tf));
    }
    idx.finalize();
    return idx;
  }

 private:
  static constexpr int kVersion = 1;
  static constexpr char kMagic[4] = {'C', 'Q', 'I', 'X'};

  void add(std::string id, std::size_t length,
           std::map<std::string, std::uint32_t> tf) {
    if (rows_.count(id)) throw data_error("duplicate chunk id '" + id + "'");
    rows_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    lengths_.push_back(length);
    tf_.push_back(std::move(tf));
  }

  void finalize() {
    df_.clear();
    double total = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      total += static_cast<double>(lengths_[i]);
      for (const auto& kv : tf_[i]) ++df_[kv.first];
    }
    avgdl_ = size() ? total / static_cast<double>(size()) : 0.0;
    norms_.assign(size(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      double s = 0.0;
      for (const auto& [t, c] : tf_[i]) {
        const double w = (1.0 + std::log(static_cast<double>(c))) * tfidf_idf(t);
        s += w * w;
      }
      norms_[i] = std::sqrt(s);
    }
  }

  static void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  static void put_str(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  static std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) {
      throw data_error("truncated binary index");
    }
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  static std::string get_str(std::istream& is) {
    const auto n = get_u64(is);
    if (n > (1u << 24)) throw data_error("corrupt binary index");
    std::string s(n, '\0');
    if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) {
      throw data_error("truncated binary index");
    }
    return s;
  }

  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> rows_;
  std::vector<std::size_t> lengths_;
  std::vector<std::map<std::string, std::uint32_t>> tf_;
  std::unordered_map<std::string, std::size_t> df_;
  std::vector<double> norms_;
  double avgdl_ = 0.0;
};

inline double bm25_score(std::span<const std::string> query,
                         const std::string& chunk_id, const LexicalIndex& index,
                         const Bm25Params& params = {}) {
  const auto row = index.row(chunk_id);
  const auto& tf = index.term_freqs(row);
  const double len = static_cast<double>(index.length(row));
  const double avgdl = index.avgdl() > 0.0 ? index.avgdl() : 1.0;
  double score = 0.0;
  for (const auto& t : query) {
    const auto it = tf.find(t);
    if (it == tf.end()) continue;
    const double f = static_cast<double>(it->second);
    score += index.bm25_idf(t) * f * (params.k1 + 1.0) /
             (f + params.k1 * (1.0 - params.b + params.b * len / avgdl));
  }
  return score;
}

inline double tfidf_cosine(std::span<const std::string> query,
                           const std::string& chunk_id,
                           const LexicalIndex& index) {
  const auto row = index.row(chunk_id);
  const auto& tf = index.term_freqs(row);
  std::map<std::string, std::uint32_t> qtf;
  for (const auto& t : query) ++qtf[t];
  double dot = 0.0, qn = 0.0;
  for (const auto& [t, c] : qtf) {
    const double idf = index.tfidf_idf(t);
    const double wq = (1.0 + std::log(static_cast<double>(c))) * idf;
    qn += wq * wq;
    const auto it = tf.find(t);
    if (it == tf.end()) continue;
    dot += wq * (1.0 + std::log(static_cast<double>(it->second))) * idf;
  }
  const double cn = index.chunk_tfidf_norm(row);
  if (qn == 0.0 || cn == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(qn) * cn), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Embeddings

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(
      const std::vector<std::string>& texts) const = 0;
};

// Hashed character 3-grams over the lowercased, space-padded text, counted
// into `dim` buckets and L2-normalized. The empty string maps to zeros.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = 256) : dim_(dim) {
    if (dim_ == 0) throw usage_error("embedding dimension must be >= 1");
  }

  std::vector<double> embed_one(std::string_view s) const {
    std::vector<double> v(dim_, 0.0);
    std::u32string cps = U" ";
    for (const auto& tok : tokenize(s)) {
      cps += text::decode_utf8(tok);
      cps += U' ';
    }
    if (cps.size() < 3) return v;
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
      std::uint64_t h = 1469598103934665603ULL;
      for (std::size_t k = i; k < i + 3; ++k) {
        h = (h ^ static_cast<std::uint64_t>(cps[k])) * 1099511628211ULL;
      }
      v[h % dim_] += 1.0;
    }
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0) {
      for (double& x : v) x /= n;
    }
    return v;
  }

  std::vector<std::vector<double>> embed(
      const std::vector<std::string>& texts) const override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

 private:
  std::size_t dim_;
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw data_error("embedding dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline double embed_similarity(const std::string& query,
                               const std::string& chunk_text,
                               const Embedder& embedder) {
  const auto v = embedder.embed({query, chunk_text});
  if (v.size() != 2) throw service_error("embedder returned the wrong count");
  return cosine(v[0], v[1]);
}

// ---------------------------------------------------------------------------
// Fusion and ranking

namespace detail {

inline std::vector<double> min_max(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  std::vector<double> out(xs.size(), 0.5);
  const double range = *hi - *lo;
  if (range == 0.0) return out;
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = (xs[i] - *lo) / range;
  return out;
}

inline void sort_by(std::vector<ScoredChunk>& v, double ScoredChunk::*score) {
  std::stable_sort(v.begin(), v.end(),
                   [score](const ScoredChunk& a, const ScoredChunk& b) {
                     if (a.*score != b.*score) return a.*score > b.*score;
                     return a.chunk_id < b.chunk_id;
                   });
}

}  // namespace detail

// Min-max normalizes each scorer over the candidate set (a constant scorer
// maps to 0.5), then takes the weighted mean. Ties break on chunk_id.
inline std::vector<ScoredChunk> fuse_scores(std::vector<ScoredChunk> candidates,
                                            const FusionWeights& weights) {
  weights.validate();
  if (candidates.empty()) return candidates;
  std::vector<double> e, b, t;
  for (const auto& c : candidates) {
    e.push_back(c.embed);
    b.push_back(c.bm25);
    t.push_back(c.tfidf);
  }
  const auto ne = detail::min_max(e), nb = detail::min_max(b),
             nt = detail::min_max(t);
  const double wsum = weights.w_embed + weights.w_bm25 + weights.w_tfidf;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].fused = (weights.w_embed * ne[i] + weights.w_bm25 * nb[i] +
                           weights.w_tfidf * nt[i]) /
                          wsum;
  }
  detail::sort_by(candidates, &ScoredChunk::fused);
  return candidates;
}

class Reranker {
 public:
  virtual ~Reranker() = default;
  virtual std::vector<double> score(
      const std::string& query, const std::vector<std::string>& candidates) const = 0;
};

// Token-set Jaccard overlap.
class JaccardReranker final : public Reranker {
 public:
  static double jaccard(std::string_view a, std::string_view b) {
    const auto ta = tokenize(a), tb = tokenize(b);
    const std::unordered_set<std::string> sa(ta.begin(), ta.end());
    const std::unordered_set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    return static_cast<double>(inter) /
           static_cast<double>(sa.size() + sb.size() - inter);
  }

  std::vector<double> score(
      const std::string& query,
      const std::vector<std::string>& candidates) const override {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(jaccard(query, c));
    return out;
  }
};

struct RetrievalConfig {
  Bm25Params bm25;
  FusionWeights fusion;
  std::size_t coarse_m = 20;
  std::size_t final_k = 5;
  bool strict = false;

  void validate() const {
    bm25.validate();
    fusion.validate();
    if (coarse_m < 1) throw usage_error("retrieval.coarse_m must be >= 1");
    if (final_k < 1) throw usage_error("retrieval.final_k must be >= 1");
    if (final_k > coarse_m) {
      throw usage_error("retrieval.final_k must not exceed retrieval.coarse_m");
    }
  }
};

// Corpus plus its index and cached chunk embeddings.
class Retriever {
 public:
  Retriever(std::vector<Chunk> chunks, LexicalIndex index,
            const Embedder& embedder, const Reranker& reranker,
            RetrievalConfig cfg = {})
      : chunks_(std::move(chunks)),
        index_(std::move(index)),
        embedder_(embedder),
        reranker_(reranker),
        cfg_(cfg) {
    cfg_.validate();
    if (index_.size() != chunks_.size()) {
      throw data_error("index and corpus disagree on chunk count");
    }
    std::vector<std::string> texts;
    texts.reserve(chunks_.size());
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
      if (index_.chunk_id(i) != chunks_[i].chunk_id) {
        throw data_error("index and corpus disagree at chunk '" +
                         chunks_[i].chunk_id + "'");
      }
      texts.push_back(chunks_[i].text);
    }
    if (!texts.empty()) {
      embeddings_ = embedder_.embed(texts);
      if (embeddings_.size() != texts.size()) {
        throw service_error("embedder returned the wrong number of vectors");
      }
    }
  }

  const std::vector<Chunk>& chunks() const { return chunks_; }
  const LexicalIndex& index() const { return index_; }
  const RetrievalConfig& config() const { return cfg_; }
  const Chunk& chunk(const std::string& id) const {
    return chunks_[index_.row(id)];
  }

  std::vector<ScoredChunk> coarse_rank(const std::string& query,
                                       std::size_t m) const {
    if (m < 1) throw usage_error("coarse_rank: m must be >= 1");
    const auto qt = tokenize(query);
    std::vector<double> qv;
    try {
      qv = embedder_.embed({query}).at(0);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw service_error(std::string("embedding the query failed: ") + e.what());
    }
    std::vector<ScoredChunk> cands;
    cands.reserve(chunks_.size());
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
      ScoredChunk s;
      s.chunk_id = chunks_[i].chunk_id;
      s.bm25 = bm25_score(qt, s.chunk_id, index_, cfg_.bm25);
      s.tfidf = tfidf_cosine(qt, s.chunk_id, index_);
      s.embed = cosine(qv, embeddings_[i]);
      cands.push_back(std::move(s));
    }
    auto ranked = fuse_scores(std::move(cands), cfg_.fusion);
    if (ranked.size() > m) ranked.resize(m);
    return ranked;
  }

  // Falls back to the coarse order when the reranker fails, unless strict.
  std::vector<ScoredChunk> rerank(const std::string& query,
                                  std::vector<ScoredChunk> top_m,
                                  std::size_t k) const {
    std::vector<std::string> texts;
    texts.reserve(top_m.size());
    for (const auto& s : top_m) texts.push_back(chunk(s.chunk_id).text);
    std::vector<double> scores;
    try {
      scores = reranker_.score(query, texts);
      if (scores.size() != top_m.size()) {
        throw service_error("reranker returned " + std::to_string(scores.size()) +
                            " scores for " + std::to_string(top_m.size()) +
                            " candidates");
      }
    } catch (const Error& e) {
      if (cfg_.strict || e.kind() != ErrorKind::Service) throw;
      std::cerr << "warning: reranker failed, keeping coarse order: " << e.what()
                << '\n';
      if (top_m.size() > k) top_m.resize(k);
      return top_m;
    }
    for (std::size_t i = 0; i < top_m.size(); ++i) top_m[i].rerank = scores[i];
    std::stable_sort(top_m.begin(), top_m.end(),
                     [](const ScoredChunk& a, const ScoredChunk& b) {
                       if (*a.rerank != *b.rerank) return *a.rerank > *b.rerank;
                       return a.chunk_id < b.chunk_id;
                     });
    if (top_m.size() > k) top_m.resize(k);
    return top_m;
  }

  std::vector<ScoredChunk> retrieve(const std::string& query) const {
    return rerank(query, coarse_rank(query, cfg_.coarse_m), cfg_.final_k);
  }

 private:
  std::vector<Chunk> chunks_;
  LexicalIndex index_;
  const Embedder& embedder_;
  const Reranker& reranker_;
  RetrievalConfig cfg_;
  std::vector<std::vector<double>> embeddings_;
};

}  // namespace curriq
