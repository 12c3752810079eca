#include "pit/ini.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace pit {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void IniSection::set(const std::string& key, std::string value, std::size_t line) {
  if (values_.count(key)) {
    throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "' in [" + name_ + "]");
  }
  values_[key] = Entry{std::move(value), line};
  order_.push_back(key);
}

const IniSection::Entry* IniSection::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

void IniSection::fail(const std::string& key, const std::string& what) const {
  auto it = values_.find(key);
  const std::string where = it != values_.end() ? "line " + std::to_string(it->second.line) + ": "
                                                : "section [" + name_ + "]: ";
  throw ConfigError(where + "key '" + key + "' " + what);
}

std::string IniSection::get_string(const std::string& key, std::optional<std::string> fallback) const {
  if (const Entry* e = find(key)) return e->value;
  if (fallback) return *fallback;
  fail(key, "is required");
}

long long IniSection::get_int(const std::string& key, std::optional<long long> fallback) const {
  const Entry* e = find(key);
  if (!e) {
    if (fallback) return *fallback;
    fail(key, "is required");
  }
  long long v = 0;
  const auto* end = e->value.data() + e->value.size();
  auto [p, ec] = std::from_chars(e->value.data(), end, v);
  if (ec != std::errc() || p != end) fail(key, "expects an integer, got '" + e->value + "'");
  return v;
}

std::size_t IniSection::get_size(const std::string& key, std::optional<std::size_t> fallback) const {
  if (!has(key) && fallback) return *fallback;
  const long long v = get_int(key);
  if (v < 0) fail(key, "must be non-negative");
  return static_cast<std::size_t>(v);
}

double IniSection::get_double(const std::string& key, std::optional<double> fallback) const {
  const Entry* e = find(key);
  if (!e) {
    if (fallback) return *fallback;
    fail(key, "is required");
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(e->value, &pos);
    if (pos != e->value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(key, "expects a number, got '" + e->value + "'");
  }
}

bool IniSection::get_bool(const std::string& key, std::optional<bool> fallback) const {
  const Entry* e = find(key);
  if (!e) {
    if (fallback) return *fallback;
    fail(key, "is required");
  }
  if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
  if (e->value == "false" || e->value == "0" || e->value == "no") return false;
  fail(key, "expects true/false, got '" + e->value + "'");
}

std::vector<double> IniSection::get_double_list(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) fail(key, "is required");
  std::vector<double> out;
  for (const auto& item : split_list(e->value)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail(key, "has a non-numeric item '" + item + "'");
    }
  }
  return out;
}

std::vector<std::size_t> IniSection::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  for (double v : get_double_list(key)) {
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      fail(key, "expects non-negative integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void IniSection::reject_unused() const {
  for (const auto& key : order_) {
    if (!used_.count(key)) fail(key, "is not recognised in [" + name_ + "]");
  }
}

IniDocument IniDocument::parse(const std::string& text, const std::string& origin) {
  IniDocument doc;
  doc.origin_ = origin;
  std::istringstream is(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated section header");
      }
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (doc.find(name)) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate section [" + name + "]");
      }
      doc.sections_.emplace_back(name, line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    if (doc.sections_.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": key outside of any section");
    }
    doc.sections_.back().set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no);
  }
  return doc;
}

IniDocument IniDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const IniSection* IniDocument::find(const std::string& name) const {
  for (const auto& s : sections_) {
    if (s.name() == name) return &s;
  }
  return nullptr;
}

std::vector<const IniSection*> IniDocument::with_prefix(const std::string& prefix) const {
  std::vector<const IniSection*> out;
  for (const auto& s : sections_) {
    if (s.name().rfind(prefix, 0) == 0) out.push_back(&s);
  }
  return out;
}

}  // namespace pit
