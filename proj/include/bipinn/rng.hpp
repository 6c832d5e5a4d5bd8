#pragma once

#include <cstdint>
#include <random>

namespace bipinn {

// Deterministic uniform generator. Draws raw mt19937_64 words and converts
// to doubles directly, so streams are bit-identical across standard library
// implementations (std::uniform_real_distribution is not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform in the open interval (lo, hi).
  double uniform_open(double lo, double hi) {
    double u = uniform01();
    while (u == 0.0) u = uniform01();
    return lo + (hi - lo) * u;
  }

  std::uint64_t next_word() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

// Stream-splitting helper so one run seed can feed several independent
// consumers (init, collocation sampling, ...) without overlap.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace bipinn
