#include "ciphernmt/alphabet.hpp"

#include <unordered_set>

#include "ciphernmt/errors.hpp"
#include "ciphernmt/util/textio.hpp"
#include "ciphernmt/util/utf8.hpp"

namespace ciphernmt {

Alphabet make_alphabet(const std::string& name, const std::vector<char32_t>& lower,
                       const std::vector<char32_t>& upper) {
  if (lower.size() < 2) throw DataError("alphabet '" + name + "': need at least 2 letters");
  if (!upper.empty() && upper.size() != lower.size())
    throw DataError("alphabet '" + name + "': uppercase row length mismatch");
  Alphabet a;
  a.name = name;
  a.lower = lower;
  a.upper = upper;
  std::unordered_set<char32_t> seen;
  for (size_t i = 0; i < lower.size(); ++i) {
    if (!seen.insert(lower[i]).second)
      throw DataError("alphabet '" + name + "': duplicate letter at index " + std::to_string(i));
    a.lower_index[lower[i]] = static_cast<int>(i);
  }
  for (size_t i = 0; i < upper.size(); ++i) {
    if (!seen.insert(upper[i]).second)
      throw DataError("alphabet '" + name + "': duplicate letter in uppercase row at index " +
                      std::to_string(i));
    a.upper_index[upper[i]] = static_cast<int>(i);
  }
  return a;
}

Alphabet make_alphabet_utf8(const std::string& name, const std::string& lower_utf8,
                            const std::string& upper_utf8) {
  return make_alphabet(name, utf8_decode(lower_utf8), utf8_decode(upper_utf8));
}

Alphabet german_alphabet() {
  // a-z, then U+00DF eszett (so z's successor is eszett), then umlauts
  std::vector<char32_t> lower;
  for (char32_t c = U'a'; c <= U'z'; ++c) lower.push_back(c);
  lower.push_back(0x00DF);  // ß
  lower.push_back(0x00E4);  // ä
  lower.push_back(0x00F6);  // ö
  lower.push_back(0x00FC);  // ü
  std::vector<char32_t> upper;
  for (char32_t c = U'A'; c <= U'Z'; ++c) upper.push_back(c);
  upper.push_back(0x1E9E);  // capital eszett
  upper.push_back(0x00C4);  // Ä
  upper.push_back(0x00D6);  // Ö
  upper.push_back(0x00DC);  // Ü
  return make_alphabet("de", lower, upper);
}

Alphabet latin_alphabet() {
  std::vector<char32_t> lower, upper;
  for (char32_t c = U'a'; c <= U'z'; ++c) lower.push_back(c);
  for (char32_t c = U'A'; c <= U'Z'; ++c) upper.push_back(c);
  return make_alphabet("latin", lower, upper);
}

Alphabet load_alphabet(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0].empty()) throw DataError("alphabet file is empty: " + path);
  std::string name = path;
  const size_t slash = name.find_last_of("/\\");
  if (slash != std::string::npos) name = name.substr(slash + 1);
  const size_t dot = name.find_last_of('.');
  if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  const std::string upper = lines.size() > 1 ? lines[1] : "";
  return make_alphabet_utf8(name, lines[0], upper);
}

Alphabet resolve_alphabet(const std::string& name_or_path) {
  if (name_or_path == "de" || name_or_path.empty()) return german_alphabet();
  if (name_or_path == "latin" || name_or_path == "en") return latin_alphabet();
  return load_alphabet(name_or_path);
}

}  // namespace ciphernmt
