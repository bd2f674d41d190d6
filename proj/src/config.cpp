#include "cohnet/config.hpp"

#include <charconv>
#include <sstream>

#include "cohnet/error.hpp"
#include "cohnet/fileutil.hpp"

namespace cohnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::InvalidArgument, "config key '" + key + "': not a number: " + v);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::InvalidArgument, "config line " + std::to_string(lineno) + ": expected key=value");
    c.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return c;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(read_text(path));
}

const std::string* KeyValueConfig::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v ? *v : fallback;
}

double KeyValueConfig::get(const std::string& key, double fallback) const {
  const auto* v = find(key);
  return v ? to_double(key, *v) : fallback;
}

int KeyValueConfig::get(const std::string& key, int fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  int out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size())
    fail(ErrorKind::InvalidArgument, "config key '" + key + "': not an integer: " + *v);
  return out;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size())
    fail(ErrorKind::InvalidArgument, "config key '" + key + "': not an unsigned integer: " + *v);
  return out;
}

bool KeyValueConfig::get(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes") return true;
  if (*v == "0" || *v == "false" || *v == "no") return false;
  fail(ErrorKind::InvalidArgument, "config key '" + key + "': not a boolean: " + *v);
}

std::vector<std::string> KeyValueConfig::get_strings(const std::string& key,
                                                     std::vector<std::string> fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<std::string> out;
  std::istringstream in(*v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> KeyValueConfig::get_list(const std::string& key,
                                             std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  std::vector<double> out;
  for (const auto& s : get_strings(key, {})) out.push_back(to_double(key, s));
  return out;
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

}  // namespace cohnet
