#pragma once

#include <map>
#include <string>
#include <vector>

namespace metanas {

// Line-oriented "key = value" configuration. '#' starts a comment, blank
// lines are skipped, keys may be dotted ("a2c.gamma"). Values are plain text
// parsed on access.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  long get_int(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list; entries are trimmed.
  std::vector<std::string> get_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return values_; }

  // Keys sharing a prefix, e.g. prefix "difficulty." -> {"omniglot": "0.9"}.
  std::map<std::string, std::string> with_prefix(const std::string& prefix) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace metanas
