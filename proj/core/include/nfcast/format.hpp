#pragma once

#include <charconv>
#include <string>
#include <string_view>

#include "nfcast/error.hpp"

namespace nfcast {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Whole-string numeric parse; throws Error(InvalidArgument) naming `what`.
template <class T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorKind::InvalidArgument, std::string(what) + ": cannot parse '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace nfcast
