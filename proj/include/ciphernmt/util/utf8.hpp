#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ciphernmt {

// Codepoints above the Unicode range encode raw bytes from malformed input:
// kByteEscape + b round-trips byte b untouched. Keeps every text transform
// total and lossless on arbitrary byte strings.
inline constexpr char32_t kByteEscape = 0x110000;

inline std::vector<char32_t> utf8_decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  const auto bad = [&](size_t at) { return kByteEscape + static_cast<unsigned char>(s[at]); };
  while (i < s.size()) {
    const unsigned char c = s[i];
    if (c < 0x80) {
      out.push_back(c);
      ++i;
      continue;
    }
    int len = 0;
    char32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      out.push_back(bad(i));
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(bad(i));
      ++i;
      continue;
    }
    bool ok = true;
    char32_t acc = cp;
    for (int k = 1; k < len; ++k) {
      const unsigned char cc = s[i + k];
      if ((cc & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      acc = (acc << 6) | (cc & 0x3F);
    }
    // reject overlong forms and surrogates so encode(decode(x)) == x
    if (ok) {
      if (len == 2 && acc < 0x80) ok = false;
      if (len == 3 && acc < 0x800) ok = false;
      if (len == 4 && (acc < 0x10000 || acc > 0x10FFFF)) ok = false;
      if (acc >= 0xD800 && acc <= 0xDFFF) ok = false;
    }
    if (!ok) {
      out.push_back(bad(i));
      ++i;
      continue;
    }
    out.push_back(acc);
    i += len;
  }
  return out;
}

inline void utf8_append(std::string& out, char32_t cp) {
  if (cp >= kByteEscape) {
    out.push_back(static_cast<char>(cp - kByteEscape));
  } else if (cp < 0x80) {
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

inline std::string utf8_encode(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) utf8_append(out, cp);
  return out;
}

}  // namespace ciphernmt
