#ifndef EPDQ_RNG_HPP
#define EPDQ_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace epdq {

// Fixed, portable generators. Experiment CSVs must be byte-identical across
// machines, so we never rely on std:: distributions (their output is
// implementation-defined).

class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t state_;
};

/// xoshiro256** seeded through SplitMix64.
class Rng {
public:
  explicit Rng(std::uint64_t seed) {
    SplitMix64 sm(seed);
    for (auto& s : s_) s = sm.next();
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [lo, hi], unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());  // full range
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % span + 1) % span;
    std::uint64_t v = next_u64();
    while (v > limit) v = next_u64();
    return lo + static_cast<std::int64_t>(v % span);
  }

  /// Poisson draw by chunked inversion; exact mean, safe for large rates.
  std::int64_t poisson(double lambda) {
    if (!(lambda >= 0)) throw std::invalid_argument("poisson: negative rate");
    std::int64_t total = 0;
    while (lambda > 16.0) {
      total += poisson_small(16.0);
      lambda -= 16.0;
    }
    return total + poisson_small(lambda);
  }

  /// Beta(1,3) by inverse CDF.
  double beta_1_3() {
    const double u = uniform01();
    return 1.0 - std::cbrt(1.0 - u);
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::int64_t poisson_small(double lambda) {
    if (lambda <= 0) return 0;
    const double limit = std::exp(-lambda);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform01();
    } while (p > limit);
    return k - 1;
  }

  std::uint64_t s_[4];
};

/// Derives an independent child seed for a numbered stream (one per
/// repetition / worker task) from a master seed.
inline std::uint64_t derive_stream(std::uint64_t master_seed, std::uint64_t stream_index) {
  SplitMix64 sm(master_seed ^ (0x94d049bb133111ebULL * (stream_index + 1)));
  sm.next();
  return sm.next();
}

}  // namespace epdq

#endif  // EPDQ_RNG_HPP
