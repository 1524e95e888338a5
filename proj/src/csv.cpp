#include "csv.hpp"

namespace edgecache::csv {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == sep) {
      out.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  out.push_back(std::move(current));
  return out;
}

Reader::Reader(const std::string& path) : path_(path), in_(path) {
  if (!in_) throw InputError("cannot open '" + path + "'");
  std::string header;
  if (!std::getline(in_, header)) throw ParseError("'" + path + "' is empty", 1);
  line_ = 1;
  if (!header.empty() && header.back() == '\r') header.pop_back();
  // UTF-8 byte order mark
  if (header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);
  const auto names = split(header);
  for (std::size_t i = 0; i < names.size(); ++i) columns_.emplace(names[i], i);
}

std::optional<std::size_t> Reader::find(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) return std::nullopt;
  return it->second;
}

std::size_t Reader::require(const std::string& name) const {
  auto index = find(name);
  if (!index) throw ParseError("'" + path_ + "' has no column '" + name + "'", 1);
  return *index;
}

bool Reader::next() {
  std::string raw;
  while (std::getline(in_, raw)) {
    ++line_;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    fields_ = split(raw);
    return true;
  }
  return false;
}

const std::string& Reader::field(std::size_t index) const {
  if (index >= fields_.size()) {
    throw ParseError("expected at least " + std::to_string(index + 1) + " fields, got " +
                         std::to_string(fields_.size()),
                     line_);
  }
  return fields_[index];
}

}  // namespace edgecache::csv
