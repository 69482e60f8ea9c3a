#include "varsched/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace varsched {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

KvMap parse_kv_text(const std::string& text) {
  KvMap kv;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": empty key");
    if (!section.empty()) key = section + "." + key;
    kv[key] = value;
  }
  return kv;
}

KvMap parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_kv_text(buf.str());
}

std::optional<std::string> kv_get(const KvMap& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) return std::nullopt;
  return it->second;
}

std::string kv_require(const KvMap& kv, const std::string& key) {
  auto v = kv_get(kv, key);
  if (!v) throw std::runtime_error("missing required config key: " + key);
  return *v;
}

double parse_double(const std::string& token) {
  std::string t = trim(token);
  if (t == "inf" || t == "+inf" || t == "Inf" || t == "INF")
    return std::numeric_limits<double>::infinity();
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0')
    throw std::runtime_error("not a number: '" + token + "'");
  return v;
}

double kv_require_double(const KvMap& kv, const std::string& key) {
  return parse_double(kv_require(kv, key));
}

double kv_get_double(const KvMap& kv, const std::string& key, double fallback) {
  auto v = kv_get(kv, key);
  return v ? parse_double(*v) : fallback;
}

std::vector<double> kv_get_doubles(const KvMap& kv, const std::string& key) {
  std::vector<double> out;
  auto v = kv_get(kv, key);
  if (!v) return out;
  for (const auto& tok : split_tokens(*v)) out.push_back(parse_double(tok));
  return out;
}

}  // namespace varsched
