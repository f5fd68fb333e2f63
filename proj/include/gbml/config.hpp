#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace gbml::expcli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` settings over a fixed table of known keys.
///
/// Files hold one assignment per line; `#` starts a comment. Unknown keys and
/// malformed values are rejected with the offending line or key named.
class Config {
 public:
  /// Every known key at its default value.
  Config();

  void parse(std::istream& is, const std::string& source = "<config>");
  void load(const std::filesystem::path& path);
  /// Applies one `key=value` override.
  void set_assignment(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& raw(const std::string& key) const;
  double number(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t seed() const;
  bool flag(const std::string& key) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<std::size_t> counts(const std::string& key) const;

  /// `key=value` pairs joined by spaces, in key order.
  std::string snapshot() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace gbml::expcli
