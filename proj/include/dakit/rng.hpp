#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace dakit {

// Generator identity recorded in run manifests. mt19937_64 output is fully
// specified by the C++ standard, so a seed reproduces the same draws on any
// conforming implementation; the normal transform below is spelled out here.
inline constexpr const char* kRngName = "mt19937_64+box-muller";

// splitmix64 finalizer; spreads low-entropy seeds over 64 bits.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Independent stream seed for stream `index` under a master seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

// Seeded standard-normal source: mt19937_64 uniforms through the polar-free
// Box-Muller transform. u1 is kept in (0,1] so log(u1) is finite.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace dakit
