#include "breathscope/keyvalue.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "breathscope/error.hpp"

namespace breathscope {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path.string());
}

KeyValueFile KeyValueFile::parse_text(const std::string& text,
                                      const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::format, origin + ":" + std::to_string(line_no) +
                                  ": expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(ErrorKind::format,
           origin + ":" + std::to_string(line_no) + ": empty key");
    kv.values_[key] = value;
  }
  return kv;
}

bool KeyValueFile::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string KeyValueFile::require_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    fail(ErrorKind::config, origin_ + ": missing required key '" + key + "'");
  return it->second;
}

double KeyValueFile::require_double(const std::string& key) const {
  std::string raw = require_string(key);
  char* end = nullptr;
  double v = std::strtod(raw.c_str(), &end);
  if (end == raw.c_str() || *end != '\0')
    fail(ErrorKind::config,
         origin_ + ": key '" + key + "' is not a number: '" + raw + "'");
  return v;
}

std::vector<double> KeyValueFile::require_doubles(const std::string& key,
                                                  std::size_t count) const {
  std::string raw = require_string(key);
  std::istringstream in(raw);
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (out.size() != count)
    fail(ErrorKind::config, origin_ + ": key '" + key + "' must hold " +
                                std::to_string(count) + " numbers, got " +
                                std::to_string(out.size()));
  return out;
}

std::string KeyValueFile::get_string(const std::string& key,
                                     const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  return has(key) ? require_double(key) : fallback;
}

long KeyValueFile::get_long(const std::string& key, long fallback) const {
  if (!has(key)) return fallback;
  double v = require_double(key);
  long l = static_cast<long>(v);
  if (static_cast<double>(l) != v)
    fail(ErrorKind::config,
         origin_ + ": key '" + key + "' must be an integer");
  return l;
}

std::set<std::string> KeyValueFile::keys() const {
  std::set<std::string> out;
  for (const auto& [k, v] : values_) out.insert(k);
  return out;
}

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::format: return "format";
    case ErrorKind::sequence: return "sequence";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::validation: return "validation";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::invalid_disparity: return "invalid-disparity";
    case ErrorKind::degeneracy: return "degeneracy";
    case ErrorKind::alignment: return "alignment";
    case ErrorKind::coverage: return "coverage";
    case ErrorKind::no_signal: return "no-signal";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace breathscope
