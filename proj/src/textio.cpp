#include "ciphernmt/util/textio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ciphernmt/errors.hpp"

namespace ciphernmt {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw DataError("write failed: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
  uint64_t h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

std::string file_checksum(const std::string& path) { return fnv1a64_hex(read_file(path)); }

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> toks;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

std::string join(const std::vector<std::string>& toks, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out += sep;
    out += toks[i];
  }
  return out;
}

}  // namespace ciphernmt
