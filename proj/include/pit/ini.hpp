#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pit {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One `[name]` section of a line-oriented `key = value` file.
class IniSection {
 public:
  IniSection() = default;
  IniSection(std::string name, std::size_t line) : name_(std::move(name)), line_(line) {}

  const std::string& name() const { return name_; }
  std::size_t line() const { return line_; }

  void set(const std::string& key, std::string value, std::size_t line);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  // Typed getters mark the key as consumed; reject_unused() then reports any
  // key nobody asked for.
  std::string get_string(const std::string& key, std::optional<std::string> fallback = std::nullopt) const;
  long long get_int(const std::string& key, std::optional<long long> fallback = std::nullopt) const;
  std::size_t get_size(const std::string& key, std::optional<std::size_t> fallback = std::nullopt) const;
  double get_double(const std::string& key, std::optional<double> fallback = std::nullopt) const;
  bool get_bool(const std::string& key, std::optional<bool> fallback = std::nullopt) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  void reject_unused() const;
  const std::vector<std::string>& keys() const { return order_; }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  const Entry* find(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;

  std::string name_;
  std::size_t line_ = 0;
  std::map<std::string, Entry> values_;
  std::vector<std::string> order_;
  mutable std::set<std::string> used_;
};

class IniDocument {
 public:
  static IniDocument parse(const std::string& text, const std::string& origin = "<string>");
  static IniDocument load(const std::string& path);

  const std::vector<IniSection>& sections() const { return sections_; }
  const IniSection* find(const std::string& name) const;
  /// Sections whose name starts with `prefix`.
  std::vector<const IniSection*> with_prefix(const std::string& prefix) const;
  const std::string& origin() const { return origin_; }

 private:
  std::vector<IniSection> sections_;
  std::string origin_;
};

std::string trim(const std::string& s);
std::vector<std::string> split_list(const std::string& s, char sep = ',');

}  // namespace pit
