#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace releaser {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Named sub-seed of a global seed. Stable across releases:
/// splitmix64(global XOR fnv1a(name)). Names in use are "trace",
/// "agent.<metric>", "ou.<metric>", "replay.<metric>", "warmup.<metric>"
/// and "random.<metric>"; the synthetic generator derives per-host streams
/// "synthetic.phase", "synthetic.cpu" and "synthetic.ram" from the trace seed.
inline std::uint64_t derive_seed(std::uint64_t global, std::string_view name) {
  return splitmix64(global ^ fnv1a(name));
}

inline std::uint64_t derive_seed(std::uint64_t global, std::string_view name, std::uint64_t index) {
  return splitmix64(derive_seed(global, name) + index);
}

}  // namespace releaser
