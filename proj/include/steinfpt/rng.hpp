#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace steinfpt {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based stream derivation.
///
/// A stream is identified by the root seed and a path of counters (e.g.
/// replication index, window index). Each counter is folded in through one
/// splitmix64 round:
///
///     s_0 = splitmix64(root)
///     s_{i+1} = splitmix64(s_i ^ (c_i + 1) * 0xd1342543de82ef95)
///
/// and the final value seeds a std::mt19937_64. Any implementation of
/// splitmix64 + mt19937_64 reproduces the same streams.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(root);
  for (std::uint64_t c : path) {
    s = splitmix64(s ^ ((c + 1) * 0xd1342543de82ef95ULL));
  }
  return s;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Named stream families, so that distinct consumers of one root seed never
// collide.
namespace stream {
inline constexpr std::uint64_t kStein = 1;
inline constexpr std::uint64_t kOu = 2;
inline constexpr std::uint64_t kOuReference = 3;
inline constexpr std::uint64_t kOuSelf = 4;
inline constexpr std::uint64_t kMartingale = 5;
}  // namespace stream

}  // namespace steinfpt
