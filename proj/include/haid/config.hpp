#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace haid {

struct ConfigError {
  int line = 0;           // 0 when not tied to a file line
  std::string key;
  std::string message;
};

class ConfigException : public std::exception {
 public:
  explicit ConfigException(ConfigError err);
  const char* what() const noexcept override { return text_.c_str(); }
  const ConfigError& error() const { return err_; }

 private:
  ConfigError err_;
  std::string text_;
};

/// Flat key=value configuration with dotted prefixes, '#' comments, and
/// bracketed arrays ("scenario.bias=[1,1.25,1]"). Later assignments win.
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path);
  static ConfigMap parse_text(const std::string& text,
                              const std::string& origin = "<memory>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::vector<double> get_double_array(
      const std::string& key, const std::vector<double>& fallback) const;

  /// Keys never read through a getter; used to reject typos.
  std::vector<std::string> unread_keys() const;

  /// Sorted key=value serialization; the run manifest hashes this.
  std::string canonical() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  mutable std::map<std::string, bool> read_;
};

std::uint64_t fnv1a_hash(const std::string& text);

}  // namespace haid
