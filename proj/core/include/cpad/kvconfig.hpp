#pragma once

#include <map>
#include <set>
#include <string>

namespace cpad {

// Flat `key = value` config file. '#' starts a comment, blank lines ignored.
// Keys match the spec'd config field names exactly.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_uint64(const std::string& key, uint64_t fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  // Throws if the file held keys never consumed by any get_* call; catches
  // typos in config files.
  void check_all_consumed() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

}  // namespace cpad
