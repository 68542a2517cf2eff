#include "ciphernmt/util/ini.hpp"

#include <cstdlib>
#include <sstream>

#include "ciphernmt/errors.hpp"
#include "ciphernmt/util/textio.hpp"

namespace ciphernmt {

namespace {
std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}
}  // namespace

IniConfig IniConfig::parse(const std::string& text) {
  IniConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw DataError("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw DataError("config line " + std::to_string(lineno) + ": empty key");
    cfg.values_[section.empty() ? key : section + "." + key] = val;
  }
  return cfg;
}

IniConfig IniConfig::load(const std::string& path) { return parse(read_file(path)); }

std::string IniConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long long IniConfig::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  const long long v = std::strtoll(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0')
    throw DataError("config: " + key + " is not an integer: " + it->second);
  return v;
}

double IniConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0')
    throw DataError("config: " + key + " is not a number: " + it->second);
  return v;
}

bool IniConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw DataError("config: " + key + " is not a boolean: " + v);
}

std::string IniConfig::serialize() const {
  std::ostringstream out;
  // section-less keys first; a section cannot be closed once opened
  for (const auto& [k, v] : values_) {
    if (k.find('.') == std::string::npos) out << k << " = " << v << '\n';
  }
  std::string section;
  for (const auto& [k, v] : values_) {
    const size_t dot = k.find('.');
    if (dot == std::string::npos) continue;
    const std::string sec = k.substr(0, dot);
    if (sec != section) {
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << k.substr(dot + 1) << " = " << v << '\n';
  }
  return out.str();
}

}  // namespace ciphernmt
