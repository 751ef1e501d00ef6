#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cavlock {

/// One `name = value` line of a config file.
struct ConfigEntry {
  std::string value;
  int line = 0;
};

/// Flat key/value configuration. Lines are `name = value`; `#` starts a
/// comment. Keys are validated against the known set when parsed.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "<config>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<double> number(const std::string& key) const;
  std::optional<std::string> text(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  void erase(const std::string& key) { entries_.erase(key); }

  /// Canonical `key = value` listing, sorted by key.
  std::string canonical() const;
  std::uint64_t hash() const;

  const std::map<std::string, ConfigEntry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

 private:
  std::map<std::string, ConfigEntry> entries_;
  std::string source_;
};

const std::vector<std::string>& known_config_keys();

std::uint64_t fnv1a64(const std::string& data);

}  // namespace cavlock
