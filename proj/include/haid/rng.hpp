#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace haid {

/// splitmix64 mix step; used to derive independent stream seeds from one
/// master seed plus stable integer tags.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag_a,
                                 std::uint64_t tag_b = 0) {
  std::uint64_t s = mix_seed(master ^ 0xa0761d6478bd642fULL);
  s = mix_seed(s ^ mix_seed(tag_a));
  s = mix_seed(s ^ mix_seed(tag_b ^ 0xe7037ed1a0b428dbULL));
  return s;
}

/// Deterministic RNG with hand-rolled transforms so sequences are identical
/// across platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() {
    // 53-bit mantissa draw in [0, 1)
    return (gen_() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  std::uint64_t uniform_u64() { return gen_(); }

  /// Box-Muller; one fresh pair per call, second value discarded for
  /// reproducibility independent of call interleaving.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Rejection-sampled truncated normal.
  double trunc_normal(double mean, double sd, double lo, double hi) {
    if (!(lo <= hi)) {
      throw std::invalid_argument("truncation bounds out of order");
    }
    if (sd <= 0.0) return std::min(hi, std::max(lo, mean));
    for (int i = 0; i < 100000; ++i) {
      const double v = normal(mean, sd);
      if (v >= lo && v <= hi) return v;
    }
    throw std::runtime_error("truncated-normal rejection loop failed to land");
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace haid
