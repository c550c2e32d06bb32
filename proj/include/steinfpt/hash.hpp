#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace steinfpt {

// FNV-1a, 64 bit. Stable across platforms, used for config/params fingerprints.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Decimal with 17 significant digits; round-trips every finite double.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Same for long double (21 digits round-trip the x87 80-bit format).
inline std::string fmt21(long double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.21Lg", v);
  return buf;
}

}  // namespace steinfpt
