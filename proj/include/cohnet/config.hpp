#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cohnet {

/// Flat key=value settings; '#' starts a comment. Keys read through the
/// getters are recorded so callers can reject unknown keys.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  int get(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       std::vector<std::string> fallback) const;

  /// Keys present in the file but never read.
  std::vector<std::string> unused_keys() const;

 private:
  const std::string* find(const std::string& key) const;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace cohnet
