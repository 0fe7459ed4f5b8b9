#pragma once

#include <cmath>
#include <cstdint>

namespace spf {

// Named sub-streams. Every consumer of randomness owns one stream so that
// adding draws in one place never shifts the sequence seen by another.
enum class Stream : std::uint64_t {
  Init = 1,       // parameter initialization
  Dropout = 2,    // spatial dropout masks
  Data = 3,       // dataset generation, splits, shuffles
  Bootstrap = 4,  // bootstrap resampling
};

// Counter-based splitmix64 generator. The state advances by a fixed odd
// constant and each output is a finalizer of the new state, so the k-th
// draw is a pure function of (seed, k). Identical (seed, stream, keys...)
// give identical sequences on every platform.
class Prng {
 public:
  Prng() : state_(0) {}
  explicit Prng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  // Derive an independent stream from a seed plus a list of keys.
  // Each key is folded through the finalizer so nearby keys decorrelate.
  static Prng derive(std::uint64_t seed, Stream stream) {
    return Prng(mix(seed ^ mix(static_cast<std::uint64_t>(stream))));
  }
  static Prng derive(std::uint64_t seed, Stream stream, std::uint64_t k0) {
    return Prng(mix(mix(seed ^ mix(static_cast<std::uint64_t>(stream))) ^ mix(k0)));
  }
  static Prng derive(std::uint64_t seed, Stream stream, std::uint64_t k0, std::uint64_t k1) {
    return Prng(mix(mix(mix(seed ^ mix(static_cast<std::uint64_t>(stream))) ^ mix(k0)) ^ mix(k1)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller; consumes exactly two draws.
  double normal() {
    double u1 = next_unit();
    double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace spf
