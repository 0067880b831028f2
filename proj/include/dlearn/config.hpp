#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dlearn/errors.hpp"

namespace dlearn {

/// Malformed or incomplete scenario configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Flat key/value scenario file in a TOML subset:
///
///   # comment
///   task = "average"
///   c = 1.5
///   [graph]            keys below become graph.<key>
///   kind = "rgg"
///   values = [0.1, 1, 10]
///
/// Values are strings, numbers, booleans or flat numeric arrays. Parsing is
/// all-or-nothing; every diagnostic names the source and line.
class Config {
 public:
  struct Entry {
    std::string raw;  // string payload, or the literal text for other kinds
    enum class Kind { string, number, boolean, list } kind = Kind::string;
    std::vector<double> list;
    std::size_t line = 0;
  };

  static Config parse(std::istream& in, const std::string& source = "<input>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string text(const std::string& key) const;
  std::string text_or(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  /// Non-negative integer; ConfigError on fractions or negatives.
  std::size_t count(const std::string& key) const;
  std::size_t count_or(const std::string& key, std::size_t fallback) const;
  bool flag_or(const std::string& key, bool fallback) const;
  /// A number is accepted as a one-element list.
  std::vector<double> numbers(const std::string& key) const;

  /// Override or add a key, e.g. from a command-line flag. The value is parsed
  /// with the same rules as the file.
  void set(const std::string& key, const std::string& value);

  const std::string& source() const { return source_; }
  std::vector<std::string> keys() const;

 private:
  const Entry& require(const std::string& key) const;
  std::string where(const Entry& e) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
};

}  // namespace dlearn
