#include "surfrann/config.hpp"

#include <fstream>
#include <sstream>

namespace surfrann {

namespace {

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

} // namespace

Config Config::parse_string(const std::string& text) {
  Config config;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    config.values_[section.empty() ? key : section + "." + key] = value;
  }
  return config;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str());
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + it->second + "'");
  }
}

long long Config::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    long long v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + it->second + "'");
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" +
                      it->second + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + it->second + "'");
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::istringstream ss(it->second);
  double v;
  while (ss >> v) out.push_back(v);
  if (out.empty())
    throw ConfigError("config key '" + key + "': expected numbers, got '" + it->second + "'");
  return out;
}

std::vector<long long> Config::get_ints(const std::string& key,
                                        const std::vector<long long>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<long long> out;
  std::istringstream ss(it->second);
  long long v;
  while (ss >> v) out.push_back(v);
  if (out.empty())
    throw ConfigError("config key '" + key + "': expected integers, got '" + it->second + "'");
  return out;
}

void Config::reject_unknown_keys(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_)
    if (known.count(key) == 0) throw ConfigError("unknown key '" + key + "' in config");
}

} // namespace surfrann
