#pragma once

// Seed derivation. Every random stream is addressed by (root seed, name,
// counters) so draws do not depend on scheduling or call order.

#include <cstdint>
#include <string_view>

namespace mfg {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Named sub-stream of a root seed ("policy-init", "noise", ...).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return splitmix64(root ^ splitmix64(h));
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return splitmix64(splitmix64(root ^ splitmix64(a + 1)) ^ (b + 0x632BE59BD9B4E019ULL));
}

// Uniform on [0, 1) from the top 53 bits.
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace mfg
