#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace breathscope {

/// Plain-text `key = value` file, one pair per line, '#' starts a comment.
/// Shared format for calibration files, sequence manifests and pipeline
/// configs.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::filesystem::path& path);
  static KeyValueFile parse_text(const std::string& text,
                                 const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  std::string require_string(const std::string& key) const;
  double require_double(const std::string& key) const;
  std::vector<double> require_doubles(const std::string& key,
                                      std::size_t count) const;

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;

  /// All keys present in the file; used to reject unknown config keys.
  std::set<std::string> keys() const;

  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

}  // namespace breathscope
