#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace securent {

using Seed = std::uint64_t;
using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Child seed for a named stream; independent of how many siblings exist.
constexpr Seed derive_seed(Seed parent, std::uint64_t stream) {
  return splitmix64(splitmix64(parent) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

inline Seed derive_seed(Seed parent, std::string_view label) {
  return derive_seed(parent, fnv1a(label));
}

inline Rng make_rng(Seed seed) { return Rng(splitmix64(seed)); }

}  // namespace securent
