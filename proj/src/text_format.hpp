#pragma once

// Shared text conventions for logs and CSV output.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "gvf/errors.hpp"

namespace gvf::text {

/// 17 significant digits: parses back to the identical double.
inline std::string real(double v) { return fmt::format("{:.17g}", v); }

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_real(std::string_view field, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError("invalid real '" + std::string(field) + "'", line);
  return v;
}

template <typename UInt>
UInt parse_uint(std::string_view field, std::size_t line) {
  field = trim(field);
  UInt v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size())
    throw ParseError("invalid integer '" + std::string(field) + "'", line);
  return v;
}

}  // namespace gvf::text
