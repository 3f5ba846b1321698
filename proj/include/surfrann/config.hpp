#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "surfrann/common.hpp"

namespace surfrann {

// Flat key-value configuration with [section] headers. Keys are addressed as
// "section.key"; keys before any section header have no prefix.
class Config {
public:
  Config() = default;
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<long long> get_ints(const std::string& key,
                                  const std::vector<long long>& fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // Throws ConfigError naming the first key not in `known`.
  void reject_unknown_keys(const std::set<std::string>& known) const;

private:
  std::map<std::string, std::string> values_;
};

} // namespace surfrann
