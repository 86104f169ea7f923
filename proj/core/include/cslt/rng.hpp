#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cslt {

// splitmix64; used to derive independent stream seeds from one master seed
// so parallel and serial runs agree.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
  // FNV-1a, fixed across platforms (std::hash is not).
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  return mix64(master ^ mix64(hash_str(tag)));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t n) {
  return mix64(derive_seed(master, tag) ^ mix64(n));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(mix64(seed)); }

}  // namespace cslt
