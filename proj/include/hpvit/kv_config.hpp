#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace hpvit {

/// Plain-text `key = value` settings; `#` starts a comment, blank lines are ignored.
/// Getters record which keys were read so leftovers can be reported as typos.
class KvConfig {
 public:
  /// Throws ConfigError with the line number on a malformed line or duplicate key.
  static KvConfig parse(const std::string& text);
  static KvConfig load(const std::filesystem::path& path);

  /// Later values win; used for command-line overrides.
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws ConfigError listing keys no getter has asked for.
  void require_all_used() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace hpvit
