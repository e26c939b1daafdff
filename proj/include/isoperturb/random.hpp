#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace isoperturb {

// Seeded stream with platform-independent draws. std::mt19937_64 output is
// fixed by the standard; the distribution classes are not, so the helpers
// below derive uniforms directly from the raw bits.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for task `index` under `seed` (SplitMix64 mixing).
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t bits() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  double log_uniform(double lo, double hi);

  double sign() { return (engine_() & 1U) ? 1.0 : -1.0; }

 private:
  std::mt19937_64 engine_;
};

inline double Rng::log_uniform(double lo, double hi) {
  return lo * std::pow(hi / lo, uniform());
}

}  // namespace isoperturb
