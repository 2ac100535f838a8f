#ifndef POLECAL_RNG_HPP
#define POLECAL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace polecal {

namespace detail {

// splitmix64 finalizer, used both as the stream mixer and the seed hash.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic random stream with fully pinned bit-to-double mapping.
///
/// Simulation outputs must be byte-identical across runs, compilers and
/// standard libraries, so no std::*_distribution is used anywhere: uniform
/// doubles come from the top 53 bits of an xoshiro-style splitmix64 stream and
/// normals from Box-Muller on those.
///
/// Substreams are derived by hashing a (seed, path...) tuple, so per-pole and
/// per-channel noise is independent of evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x6a09e667f3bcc909ULL) {
    // Warm up so that small seeds do not produce correlated leading draws.
    (void)next_u64();
    (void)next_u64();
  }

  /// Substream keyed by an arbitrary path of indices under a root seed.
  static Rng split(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = seed;
    (void)detail::splitmix64(h);
    for (std::uint64_t p : path) {
      h ^= detail::splitmix64(h) ^ (p + 0x9e3779b97f4a7c15ULL);
      (void)detail::splitmix64(h);
    }
    return Rng(h);
  }

  std::uint64_t next_u64() { return detail::splitmix64(state_); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; one spare value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace polecal

#endif  // POLECAL_RNG_HPP
