#pragma once

// Small UTF-8 text utilities shared by the judge and the retriever.
//
// Case folding and the alphanumeric test cover ASCII, Latin-1, Latin
// Extended-A, Greek and Cyrillic explicitly. Other non-ASCII code points are
// treated as word characters unless they fall in a known punctuation or
// space block, which keeps CJK and similar scripts inside tokens.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace curriq::text {

namespace detail {

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace detail

// Decodes UTF-8 leniently: invalid bytes become U+FFFD and decoding resumes
// at the next byte.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c >> 5) == 0x6) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c >> 4) == 0xE) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c >> 3) == 0x1E) {
      len = 4;
      cp = c & 0x07;
    } else {
      out.push_back(U'�');
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(U'�');
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(U'�');
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

inline std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) detail::append_utf8(out, cp);
  return out;
}

inline char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c < 0x80) return c;
  // Latin-1 uppercase (skipping the multiplication sign).
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 32;
  // Latin Extended-A: even code points are uppercase in most of the block.
  if (c >= 0x100 && c <= 0x137 && (c % 2 == 0)) return c + 1;
  if (c >= 0x139 && c <= 0x148 && (c % 2 == 1)) return c + 1;
  if (c >= 0x14A && c <= 0x177 && (c % 2 == 0)) return c + 1;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E && (c % 2 == 1)) return c + 1;
  // Greek capitals.
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 32;
  // Cyrillic capitals.
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
         c == U'\v' || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200B) || c == 0x2028 || c == 0x2029 ||
         c == 0x202F || c == 0x205F || c == 0x3000 || c == 0xFEFF;
}

inline bool is_alnum(char32_t c) {
  if (c < 0x80) {
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') ||
           (c >= U'0' && c <= U'9');
  }
  if (is_space(c)) return false;
  if (c >= 0xA1 && c <= 0xBF) return false;  // Latin-1 punctuation/symbols
  if (c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false;  // punctuation, symbols, arrows
  if (c >= 0x3000 && c <= 0x303F) return false;  // CJK punctuation
  if (c >= 0xFE30 && c <= 0xFE4F) return false;  // CJK compatibility forms
  if (c >= 0xFF00 && c <= 0xFF0F) return false;  // fullwidth punctuation
  if (c >= 0xFF1A && c <= 0xFF20) return false;
  if (c >= 0xFF3B && c <= 0xFF40) return false;
  if (c >= 0xFF5B && c <= 0xFF65) return false;
  if (c == 0xFFFD) return false;
  if (c >= 0x1F000 && c <= 0x1FAFF) return false;  // emoji and pictographs
  return true;
}

inline std::string lowercase(std::string_view s) {
  auto cps = decode_utf8(s);
  for (auto& c : cps) c = to_lower(c);
  return encode_utf8(cps);
}

// Lowercase, split on every non-alphanumeric code point, drop empties.
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::u32string current;
  for (char32_t c : decode_utf8(s)) {
    if (is_alnum(c)) {
      current.push_back(to_lower(c));
    } else if (!current.empty()) {
      out.push_back(encode_utf8(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(encode_utf8(current));
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

// Answer normalization used by the built-in judge: lowercase, map curly
// apostrophes to ASCII, collapse whitespace, trim, then strip trailing
// punctuation.
inline std::string normalize_answer(std::string_view s) {
  std::u32string out;
  bool pending_space = false;
  for (char32_t c : decode_utf8(s)) {
    if (c == 0x2018 || c == 0x2019 || c == 0x02BC) c = U'\'';
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(to_lower(c));
  }
  const auto terminal = [](char32_t c) {
    return c == U'.' || c == U'!' || c == U'?' || c == U',' || c == U';' ||
           c == U':' || c == 0x3002 || c == 0xFF01 || c == 0xFF1F ||
           c == 0x2026;
  };
  while (!out.empty() && (terminal(out.back()) || out.back() == U' ')) {
    out.pop_back();
  }
  return encode_utf8(out);
}

}  // namespace curriq::text
