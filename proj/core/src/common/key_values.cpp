#include "ciat/key_values.hpp"

#include <fstream>
#include <sstream>

#include "ciat/error.hpp"

namespace ciat {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

void KeyValues::set(const std::string& key, double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  entries_[key] = out.str();
}

std::optional<std::string> KeyValues::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

const std::string& KeyValues::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error("missing required setting '" + key + "'");
  return it->second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

std::size_t KeyValues::get_size(const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(key, fallback));
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used != it->second.size() || it->second.front() == '-') throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw Error("setting '" + key + "' expects a non-negative integer, got '" + it->second + "'");
  }
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw Error("setting '" + key + "' expects a number, got '" + it->second + "'");
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const auto& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("setting '" + key + "' expects a boolean, got '" + v + "'");
}

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

KeyValues KeyValues::with_prefix(const std::string& prefix) const {
  KeyValues out;
  for (const auto& [k, v] : entries_)
    if (k.rfind(prefix, 0) == 0) out.entries_[k.substr(prefix.size())] = v;
  return out;
}

std::string KeyValues::to_text(const char* separator) const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + separator + v + "\n";
  return out;
}

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty key");
    kv.entries_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void KeyValues::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_text(" = ");
}

}  // namespace ciat
