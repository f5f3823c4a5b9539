#pragma once

#include <cstdint>

namespace oldroyd {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Named random streams derived from one master seed.
enum class SeedStream : std::uint64_t {
  noise = 1,
  initial_velocity = 2,
  initial_stress = 3,
  verification = 4,
};

/// Counter-based derivation: seed = mix(mix(master ^ mix(stream)) + index).
/// Run r of an ensemble always receives the same seed, whatever the order
/// in which runs are executed.
constexpr std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t index = 0) {
  const std::uint64_t s = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(stream)));
  return splitmix64(s + splitmix64(index));
}

}  // namespace oldroyd
