#include "hpvit/kv_config.hpp"

#include <charconv>
#include <sstream>

#include "hpvit/errors.hpp"
#include "hpvit/tensor_io.hpp"

namespace hpvit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
  return value;
}

}  // namespace

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (cfg.contains(key)) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.values_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse(std::string(bytes.begin(), bytes.end()));
}

std::optional<std::string> KvConfig::get(const std::string& key) const {
  used_.insert(key);
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::size_t KvConfig::get_size(const std::string& key, std::size_t fallback) const {
  const auto v = get(key);
  return v ? parse_number<std::size_t>(key, *v) : fallback;
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto v = get(key);
  return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto v = get(key);
  return v ? parse_number<double>(key, *v) : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("config: '" + key + "' expects true|false, got '" + *v + "'");
}

void KvConfig::require_all_used() const {
  std::string unknown;
  for (const auto& [k, _] : values_) {
    if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) throw ConfigError("config: unknown keys: " + unknown);
}

}  // namespace hpvit
