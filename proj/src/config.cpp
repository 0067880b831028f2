#include "dlearn/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dlearn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char ch : k) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.')) return false;
  }
  return true;
}

// strips a trailing comment that is not inside a string
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

// throws std::string with the reason
Config::Entry parse_value(const std::string& text) {
  Config::Entry e;
  const std::string v = trim(text);
  if (v.empty()) throw std::string("missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw std::string("unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char nx = v[++i];
        out += nx == 'n' ? '\n' : nx == 't' ? '\t' : nx;
      } else if (v[i] == '"') {
        throw std::string("stray quote inside string");
      } else {
        out += v[i];
      }
    }
    e.kind = Config::Entry::Kind::string;
    e.raw = out;
    return e;
  }
  e.raw = v;
  if (v == "true" || v == "false") {
    e.kind = Config::Entry::Kind::boolean;
    return e;
  }
  if (v.front() == '[') {
    if (v.back() != ']') throw std::string("unterminated array");
    e.kind = Config::Entry::Kind::list;
    const std::string body = trim(v.substr(1, v.size() - 2));
    if (body.empty()) return e;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      double x;
      const std::string t = trim(item);
      if (t.empty() && ss.eof()) break;  // trailing comma
      if (!parse_double(t, x)) throw std::string("array element '" + t + "' is not a number");
      e.list.push_back(x);
    }
    return e;
  }
  double x;
  if (!parse_double(v, x)) throw std::string("cannot read value '" + v + "' (strings need quotes)");
  e.kind = Config::Entry::Kind::number;
  e.list = {x};
  return e;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::string line, section;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw ConfigError(source + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail("unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!valid_key(section)) fail("bad section name '" + section + "'");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (!valid_key(key)) fail("bad key '" + key + "'");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.entries_.count(full)) {
      fail("duplicate key '" + full + "' (first set on line " + std::to_string(cfg.entries_[full].line) + ")");
    }
    try {
      Entry e = parse_value(t.substr(eq + 1));
      e.line = lineno;
      cfg.entries_[full] = std::move(e);
    } catch (const std::string& why) {
      fail(why + " for key '" + full + "'");
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

std::string Config::where(const Entry& e) const {
  return e.line ? source_ + ":" + std::to_string(e.line) : source_ + " (override)";
}

const Config::Entry& Config::require(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(source_ + ": missing required key '" + key + "'");
  return it->second;
}

std::string Config::text(const std::string& key) const {
  const Entry& e = require(key);
  if (e.kind != Entry::Kind::string) throw ConfigError(where(e) + ": key '" + key + "' must be a quoted string");
  return e.raw;
}

std::string Config::text_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

double Config::number(const std::string& key) const {
  const Entry& e = require(key);
  if (e.kind != Entry::Kind::number) throw ConfigError(where(e) + ": key '" + key + "' must be a number");
  return e.list.front();
}

double Config::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::size_t Config::count(const std::string& key) const {
  const double x = number(key);
  if (x < 0.0 || x != std::floor(x) || x > 1e15) {
    throw ConfigError(where(require(key)) + ": key '" + key + "' must be a non-negative integer");
  }
  return static_cast<std::size_t>(x);
}

std::size_t Config::count_or(const std::string& key, std::size_t fallback) const {
  return has(key) ? count(key) : fallback;
}

bool Config::flag_or(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const Entry& e = require(key);
  if (e.kind != Entry::Kind::boolean) throw ConfigError(where(e) + ": key '" + key + "' must be true or false");
  return e.raw == "true";
}

std::vector<double> Config::numbers(const std::string& key) const {
  const Entry& e = require(key);
  if (e.kind != Entry::Kind::list && e.kind != Entry::Kind::number) {
    throw ConfigError(where(e) + ": key '" + key + "' must be a number or a numeric array");
  }
  return e.list;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!valid_key(key)) throw ConfigError("bad override key '" + key + "'");
  try {
    Entry e = parse_value(value);
    entries_[key] = std::move(e);
  } catch (const std::string&) {
    // unquoted words are taken as strings on the command line
    Entry e;
    e.raw = trim(value);
    entries_[key] = std::move(e);
  }
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

}  // namespace dlearn
