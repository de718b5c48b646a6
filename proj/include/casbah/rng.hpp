#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace casbah {

namespace detail {
// SplitMix64 finalizer, used both to seed the engine and to derive
// independent child streams from (seed, index) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

double normal_quantile(double p);  // defined in dist.cpp (AS 241)

// Seeded random stream. Every draw is a deterministic function of the seed
// and the call sequence; no global or thread-local state. Normal variates
// use the inverse CDF so the stream stays stateless and portable.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed)
      : engine_(detail::splitmix64(seed)), seed_(seed) {}

  // Independent stream derived from this stream's seed and an index.
  // Used to fan replicates/chains out without sharing state.
  RngStream child(std::uint64_t index) const {
    return RngStream(detail::splitmix64(seed_ ^ detail::splitmix64(index + 1)));
  }

  std::uint64_t seed() const { return seed_; }

  // Uniform on the open interval (0,1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_quantile(uniform()); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() { return -std::log(uniform()); }

  // Gamma(shape, scale 1), Marsaglia-Tsang.
  double gamma(double shape) {
    if (shape < 1.0) {
      return gamma(shape + 1.0) * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Inverse gamma with shape a and scale b, mean b/(a-1).
  double inv_gamma(double shape, double scale) { return scale / gamma(shape); }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
};

}  // namespace casbah
