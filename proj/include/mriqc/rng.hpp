#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "mriqc/common.hpp"

namespace mriqc {

// splitmix64; used to derive independent child seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t seed_for(std::uint64_t master, std::uint64_t stream) {
  return mix_seed(master ^ mix_seed(stream));
}

inline std::uint64_t seed_for(std::uint64_t master, std::string_view tag) {
  return seed_for(master, fnv1a64(tag.data(), tag.size()));
}

// Deterministic random source. The engine is the standard-mandated
// mt19937_64; uniform and normal draws are generated here rather than via
// std::*_distribution so streams are identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // in [0, 1)
  double uniform01() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // in [0, n)
  std::uint64_t uniform_int(std::uint64_t n) {
    require(n > 0, "Rng::uniform_int: n must be positive");
    return std::uint64_t(uniform01() * double(n)) % n;
  }

  // Box-Muller; consumes exactly two draws per call.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Rng child(std::uint64_t stream) { return Rng(seed_for(next_u64(), stream)); }

private:
  std::mt19937_64 engine_;
};

}  // namespace mriqc
