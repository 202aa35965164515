#include "noisecurve/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "noisecurve/errors.hpp"
#include "noisecurve/util.hpp"

namespace noisecurve {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::config, "line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(ErrorCode::config, "line " + std::to_string(lineno) + ": empty key");
    if (cfg.values_.count(key))
      fail(ErrorCode::config, "duplicate key: " + key);
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::set(const std::string& key, const std::string& value) {
  if (trim(key).empty()) fail(ErrorCode::config, "empty key");
  values_[trim(key)] = trim(value);
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

std::string Config::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::config, "missing key: " + key);
  consumed_.insert(key);
  return it->second;
}

std::string Config::get_string(const std::string& key) const { return raw(key); }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}

double Config::get_double(const std::string& key) const {
  const std::string v = raw(key);
  try {
    return parse_double(v);
  } catch (const Error&) {
    fail(ErrorCode::config, "key " + key + ": not a number: " + v);
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long Config::get_int(const std::string& key) const {
  const std::string v = raw(key);
  errno = 0;
  char* end = nullptr;
  const long long out = std::strtoll(v.c_str(), &end, 10);
  if (errno != 0 || end == v.c_str() || *end != '\0')
    fail(ErrorCode::config, "key " + key + ": not an integer: " + v);
  return out;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string v = raw(key);
  errno = 0;
  char* end = nullptr;
  const unsigned long long out = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || end == v.c_str() || *end != '\0' || v.find('-') != std::string::npos)
    fail(ErrorCode::config, "key " + key + ": not an unsigned integer: " + v);
  return out;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? get_u64(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
  const std::string v = raw(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::config, "key " + key + ": not a boolean: " + v);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::vector<std::size_t> Config::get_size_list(const std::string& key) const {
  const std::string v = raw(key);
  std::vector<std::size_t> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    errno = 0;
    char* end = nullptr;
    const unsigned long long n = std::strtoull(item.c_str(), &end, 10);
    if (item.empty() || errno != 0 || end == item.c_str() || *end != '\0' ||
        item.find('-') != std::string::npos)
      fail(ErrorCode::config, "key " + key + ": bad list entry: " + item);
    out.push_back(static_cast<std::size_t>(n));
  }
  if (out.empty()) fail(ErrorCode::config, "key " + key + ": empty list");
  return out;
}

std::vector<std::size_t> Config::get_size_list(
    const std::string& key, const std::vector<std::size_t>& fallback) const {
  return has(key) ? get_size_list(key) : fallback;
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (k.compare(0, prefix.size(), prefix) == 0) out.push_back(k);
  return out;
}

void Config::require_all_consumed() const {
  std::string unknown;
  for (const auto& [k, v] : values_) {
    if (consumed_.count(k)) continue;
    if (!unknown.empty()) unknown += ", ";
    unknown += k;
  }
  if (!unknown.empty()) fail(ErrorCode::config, "unknown key: " + unknown);
}

std::optional<std::uint64_t> env_seed_override() {
  const char* v = std::getenv("NOISECURVE_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const unsigned long long out = std::strtoull(v, &end, 10);
  if (errno != 0 || end == v || *end != '\0')
    fail(ErrorCode::config, std::string("NOISECURVE_SEED is not an unsigned integer: ") + v);
  return static_cast<std::uint64_t>(out);
}

}  // namespace noisecurve
