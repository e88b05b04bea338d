#pragma once

// Small text helpers shared by the CSV and key-value readers.

#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "shotvalue/error.hpp"

namespace shotvalue::detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline bool is_blank_or_comment(std::string_view line) {
  auto t = trim(line);
  return t.empty() || t.front() == '#';
}

// Plain comma split; fields are trimmed. No quoting support: ids never
// contain commas.
inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line;
};

inline std::vector<KeyValue> read_key_values(std::istream& in, std::size_t& line_no) {
  std::vector<KeyValue> out;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    auto key = trim(std::string_view(line).substr(0, eq));
    auto value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line_no);
    out.push_back({std::string(key), std::string(value), line_no});
  }
  return out;
}

}  // namespace shotvalue::detail
