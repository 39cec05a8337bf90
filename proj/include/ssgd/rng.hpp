#pragma once

#include <cstdint>
#include <random>

namespace ssgd {

using Rng = std::mt19937_64;

// Independent stream purposes for one worker. Keeping them apart makes the
// draws of one purpose independent of how many draws the other made.
enum class Stream : std::uint64_t {
  kDelay = 1,
  kNoise = 2,
  kProfile = 3,
  kSchedule = 4,
};

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t worker,
                                    Stream purpose) {
  return mix64(mix64(mix64(master_seed) ^ worker) ^ static_cast<std::uint64_t>(purpose));
}

inline Rng make_stream(std::uint64_t master_seed, std::uint64_t worker, Stream purpose) {
  return Rng(stream_seed(master_seed, worker, purpose));
}

// Uniform on [0, 1) with 53 random bits; identical on every platform.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace ssgd
