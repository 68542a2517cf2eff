#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace ciphernmt {

// Ordered letter sequence defining the rotation group. A letter's rotation
// index is its position. An optional parallel uppercase row of the same
// length lets uppercase letters rotate while preserving case.
struct Alphabet {
  std::string name;
  std::vector<char32_t> lower;
  std::vector<char32_t> upper;  // empty, or same length as lower
  std::unordered_map<char32_t, int> lower_index;
  std::unordered_map<char32_t, int> upper_index;

  size_t size() const { return lower.size(); }
};

// Validates: length >= 2, no duplicate characters across both rows,
// upper empty or same length as lower.
Alphabet make_alphabet(const std::string& name, const std::vector<char32_t>& lower,
                       const std::vector<char32_t>& upper = {});

Alphabet make_alphabet_utf8(const std::string& name, const std::string& lower_utf8,
                            const std::string& upper_utf8 = "");

// a..z with eszett at index 26 (y maps to eszett under ROT-2), then umlauts.
// The umlaut positions are configurable by supplying a custom alphabet file.
Alphabet german_alphabet();

// ASCII a..z / A..Z.
Alphabet latin_alphabet();

// File format: line 1 = ordered lowercase letters, optional line 2 = parallel
// uppercase row. Name derived from the filename (stem).
Alphabet load_alphabet(const std::string& path);

// Resolves a builtin name ("de", "latin") or a path to an alphabet file.
Alphabet resolve_alphabet(const std::string& name_or_path);

}  // namespace ciphernmt
