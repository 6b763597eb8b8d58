#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "error.hpp"

namespace ggrasp::io {

static_assert(std::endian::native == std::endian::little, "container files assume a little-endian host");

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) fail(ErrorCode::kFormat, "unexpected end of file");
  return value;
}

inline void write_string(std::ostream& os, std::string_view s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, std::uint32_t max_len = 1u << 20) {
  const auto n = read_pod<std::uint32_t>(is);
  if (n > max_len) fail(ErrorCode::kFormat, "string field too long");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) fail(ErrorCode::kFormat, "unexpected end of file");
  return s;
}

}  // namespace ggrasp::io
