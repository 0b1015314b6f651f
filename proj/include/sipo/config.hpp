#pragma once

#include "sipo/core.hpp"

#include <map>
#include <string>
#include <vector>

namespace sipo {

struct KeyInfo {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every recognised key, in documentation order.
const std::vector<KeyInfo>& config_keys();
std::string config_help();

/// Flat `section.name = value` text. Lines starting with '#' are comments;
/// a `[section]` line prefixes the following bare names with `section.`.
/// Unknown keys are rejected at parse time.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config from_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value);

  /// Explicit value or the registered default; records the value used.
  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  Index get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;

  /// Records a value resolved outside the registry default (e.g. "auto").
  void record(const std::string& key, const std::string& value) const { used_[key] = value; }

  const std::map<std::string, std::string>& explicit_values() const { return values_; }
  /// key = value for every key the run read, sorted.
  std::string manifest() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> used_;
};

}  // namespace sipo
