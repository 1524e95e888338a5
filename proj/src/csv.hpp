#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "edgecache/errors.hpp"

namespace edgecache::csv {

/// Splits one CSV record. Handles double-quoted fields with "" escapes.
std::vector<std::string> split(std::string_view line, char sep = ',');

/// Line-oriented reader that resolves column names from the header row.
class Reader {
 public:
  explicit Reader(const std::string& path);

  /// Index of `name` in the header, or nullopt.
  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t require(const std::string& name) const;

  /// Advances to the next non-empty record. Returns false at end of file.
  bool next();
  const std::vector<std::string>& fields() const noexcept { return fields_; }
  const std::string& field(std::size_t index) const;
  std::size_t line() const noexcept { return line_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::unordered_map<std::string, std::size_t> columns_;
  std::vector<std::string> fields_;
  std::size_t line_ = 0;
};

template <typename T>
T parse_number(std::string_view text, std::size_t line, std::string_view what) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError("invalid " + std::string(what) + " '" + std::string(text) + "'", line);
  }
  return value;
}

}  // namespace edgecache::csv
