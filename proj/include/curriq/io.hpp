#pragma once

// File helpers: JSONL in and out with path:line diagnostics.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "curriq/error.hpp"

namespace curriq::io {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw data_error("write failed for '" + path.string() + "'");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  const auto text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(path.string() + ": invalid JSON: " + e.what());
  }
}

// Calls `fn(json, line_number)` for every non-blank line. Parse errors and
// exceptions thrown by `fn` are reported as data errors at path:line.
template <class Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw data_error(where + ": invalid JSON: " + e.what());
    }
    try {
      fn(j, lineno);
    } catch (const Error& e) {
      throw Error(e.kind(), where + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw data_error(where + ": " + e.what());
    }
  }
}

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::vector<T> out;
  for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    out.push_back(j.get<T>());
  });
  return out;
}

template <class Range>
std::string to_jsonl(const Range& items) {
  std::string out;
  for (const auto& it : items) {
    out += nlohmann::json(it).dump();
    out += '\n';
  }
  return out;
}

}  // namespace curriq::io
