#pragma once

// HTTP clients for the external judge, embedding and reranker services.

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "curriq/error.hpp"
#include "curriq/eval_core.hpp"
#include "curriq/retrieval.hpp"

namespace curriq {

struct ServiceEndpoint {
  std::string url;  // http://host[:port]/path
  int timeout_ms = 10000;
  int retries = 2;
  std::string api_key;  // sent as a bearer token when non-empty

  bool configured() const { return !url.empty(); }

  void validate(const std::string& field) const {
    if (timeout_ms < 1) throw usage_error(field + ".timeout_ms must be >= 1");
    if (retries < 0) throw usage_error(field + ".retries must be >= 0");
    if (configured() && url.rfind("http://", 0) != 0) {
      throw usage_error(field + ".url must start with http://");
    }
  }
};

// Fills url/api_key from the environment when the config leaves them empty.
inline ServiceEndpoint endpoint_from_env(ServiceEndpoint ep,
                                         const char* url_var) {
  if (ep.url.empty()) {
    if (const char* v = std::getenv(url_var)) ep.url = v;
  }
  if (ep.api_key.empty()) {
    if (const char* v = std::getenv("CURRIQ_API_KEY")) ep.api_key = v;
  }
  return ep;
}

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host:port
  std::string path;
};

inline SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw usage_error("malformed service url '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

// POSTs JSON and returns the parsed JSON reply. Transport errors and non-2xx
// statuses are retried; the final failure is a service error.
inline nlohmann::json post_json(const ServiceEndpoint& ep,
                                const nlohmann::json& body,
                                const std::string& what) {
  const auto u = detail::split_url(ep.url);
  httplib::Client cli(u.origin);
  const auto sec = ep.timeout_ms / 1000;
  const auto usec = (ep.timeout_ms % 1000) * 1000;
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
  httplib::Headers headers;
  if (!ep.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + ep.api_key);
  }
  const auto payload = body.dump();
  std::string last;
  for (int attempt = 0; attempt <= ep.retries; ++attempt) {
    auto res = cli.Post(u.path, headers, payload, "application/json");
    if (!res) {
      last = httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last = "HTTP " + std::to_string(res->status);
      continue;
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      last = std::string("invalid JSON reply: ") + e.what();
    }
  }
  throw service_error(what + " at " + ep.url + " failed after " +
                      std::to_string(ep.retries + 1) + " attempt(s): " + last);
}

// {question, ground_truth, response} -> {label}
class HttpJudge final : public Judge {
 public:
  explicit HttpJudge(ServiceEndpoint ep) : ep_(std::move(ep)) {}

  JudgmentLabel judge(const JudgeRequest& r) const override {
    const auto reply = post_json(
        ep_,
        {{"question", r.question},
         {"ground_truth", r.ground_truth},
         {"response", r.response}},
        "judge service");
    if (!reply.is_object() || !reply.contains("label") ||
        !reply["label"].is_string()) {
      throw service_error("judge service reply has no string 'label'");
    }
    const auto label = parse_label(reply["label"].get<std::string>());
    if (!label) {
      throw service_error("judge service returned unknown label '" +
                          reply["label"].get<std::string>() + "'");
    }
    return *label;
  }

 private:
  ServiceEndpoint ep_;
};

// {texts: [...]} -> {vectors: [[...]]}, sent in batches.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(ServiceEndpoint ep, std::size_t batch = 64)
      : ep_(std::move(ep)), batch_(batch ? batch : 1) {}

  std::vector<std::vector<double>> embed(
      const std::vector<std::string>& texts) const override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); i += batch_) {
      const auto end = std::min(texts.size(), i + batch_);
      const std::vector<std::string> part(texts.begin() + static_cast<std::ptrdiff_t>(i),
                                          texts.begin() + static_cast<std::ptrdiff_t>(end));
      const auto reply =
          post_json(ep_, nlohmann::json::object({{"texts", part}}), "embedding service");
      if (!reply.is_object() || !reply.contains("vectors") ||
          !reply["vectors"].is_array() || reply["vectors"].size() != part.size()) {
        throw service_error("embedding service reply must hold one vector per text");
      }
      try {
        for (const auto& v : reply["vectors"]) {
          out.push_back(v.get<std::vector<double>>());
        }
      } catch (const nlohmann::json::exception& e) {
        throw service_error(std::string("embedding service vector: ") + e.what());
      }
    }
    return out;
  }

 private:
  ServiceEndpoint ep_;
  std::size_t batch_;
};

// {query, candidates: [...]} -> {scores: [...]}
class HttpReranker final : public Reranker {
 public:
  explicit HttpReranker(ServiceEndpoint ep) : ep_(std::move(ep)) {}

  std::vector<double> score(
      const std::string& query,
      const std::vector<std::string>& candidates) const override {
    const auto reply = post_json(
        ep_, {{"query", query}, {"candidates", candidates}}, "reranker service");
    if (!reply.is_object() || !reply.contains("scores") ||
        !reply["scores"].is_array()) {
      throw service_error("reranker service reply has no 'scores' array");
    }
    try {
      return reply["scores"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw service_error(std::string("reranker service scores: ") + e.what());
    }
  }

 private:
  ServiceEndpoint ep_;
};

}  // namespace curriq
