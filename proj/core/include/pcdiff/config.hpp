#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcdiff {

/// Invalid configuration; key() names the offending entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::invalid_argument(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Flat key=value settings with dotted namespaces.
///
/// File format: one `key = value` per line, `#` starts a comment, blank
/// lines ignored. Unknown keys and malformed values throw ConfigError.
class Config {
 public:
  /// Every known key at its default value.
  Config();

  static Config parse(std::istream& is);
  static Config load(const std::string& path);

  /// Sets and validates one key.
  void set(const std::string& key, const std::string& value);
  /// True if the key was given explicitly rather than left at its default.
  bool is_set(const std::string& key) const { return explicit_.count(key) != 0; }

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;

  /// Cross-key checks (e.g. beta_start <= beta_end).
  void validate() const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> explicit_;
};

}  // namespace pcdiff
