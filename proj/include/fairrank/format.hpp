#ifndef FAIRRANK_FORMAT_HPP_
#define FAIRRANK_FORMAT_HPP_

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace fairrank {

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

/// Fixed 9 significant digits, for report tables.
inline std::string format_sig9(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
  if (ec != std::errc()) throw std::runtime_error("format_sig9 failed");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view text, const std::string& what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument(what + ": bad number '" + std::string(text) + "'");
  return v;
}

inline long long parse_int(std::string_view text, const std::string& what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw std::invalid_argument(what + ": bad integer '" + std::string(text) + "'");
  return v;
}

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace fairrank

#endif  // FAIRRANK_FORMAT_HPP_
