#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace varsched {

// Flat key-value configuration files:
//
//   # comment
//   key = value
//   [section]
//   other = 1 2 3        # becomes "section.other"
//
// Values are free text up to end of line (inline # comments stripped);
// repeated keys keep the last occurrence.
using KvMap = std::map<std::string, std::string>;

// Throws std::runtime_error with a line number on malformed input.
KvMap parse_kv_text(const std::string& text);
KvMap parse_kv_file(const std::string& path);

std::string trim(const std::string& s);
std::vector<std::string> split_tokens(const std::string& s);

// Lookup helpers; the "require" forms throw std::runtime_error naming the key.
std::optional<std::string> kv_get(const KvMap& kv, const std::string& key);
std::string kv_require(const KvMap& kv, const std::string& key);
double kv_require_double(const KvMap& kv, const std::string& key);
double kv_get_double(const KvMap& kv, const std::string& key, double fallback);
std::vector<double> kv_get_doubles(const KvMap& kv, const std::string& key);

// Parses a double accepting "inf"/"+inf" for infinity.
double parse_double(const std::string& token);

}  // namespace varsched
