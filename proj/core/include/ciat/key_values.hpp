#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace ciat {

// Ordered `key = value` settings used by run configs and file headers.
class KeyValues {
 public:
  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  void set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, double value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> find(const std::string& key) const;
  const std::string& get(const std::string& key) const;

  std::string get_or(const std::string& key, const std::string& fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Copies every entry of `other`, overwriting existing keys.
  void merge(const KeyValues& other);
  // Entries whose key starts with `prefix`, with the prefix removed.
  KeyValues with_prefix(const std::string& prefix) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  // "key=value" lines (header blocks).
  std::string to_text(const char* separator = "=") const;
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace ciat
