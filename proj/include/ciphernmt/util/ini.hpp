#pragma once

#include <map>
#include <string>

namespace ciphernmt {

// Minimal "key = value" config with [sections]; '#' and ';' start comments.
// Lookup keys are "section.key". The serialized form is what train echoes
// into checkpoints and manifests.
class IniConfig {
 public:
  IniConfig() = default;

  static IniConfig parse(const std::string& text);
  static IniConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback = "") const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& values() const { return values_; }

  // Deterministic text form (sections sorted, keys sorted).
  std::string serialize() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ciphernmt
