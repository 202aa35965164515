#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace noisecurve {

// Flat key=value configuration. '#' starts a comment, blank lines are
// skipped, duplicate keys are rejected. Every key must be consumed by a
// getter before require_all_consumed passes, so typos surface as errors
// instead of silently falling back to defaults.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);  // upsert
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key,
                                         const std::vector<std::size_t>& fallback) const;

  // Keys sorted lexicographically; does not consume them.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  void require_all_consumed() const;

 private:
  std::string raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

// Seed override from the NOISECURVE_SEED environment variable; a set but
// unparseable value is a configuration error.
std::optional<std::uint64_t> env_seed_override();

}  // namespace noisecurve
