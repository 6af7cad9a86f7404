#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>

namespace siamgrid::augment {

/// splitmix64-style mixing of a base seed with an ordered list of keys.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/**
 * Reproducible random stream. The engine is std::mt19937_64, whose output
 * sequence is fixed by the standard; all conversions to floating point and
 * integer ranges are done here rather than through std distributions, whose
 * algorithms are implementation-defined.
 */
class seeded_rng {
public:
  explicit seeded_rng(std::uint64_t seed) : m_seed(seed), m_engine(seed) {}

  std::uint64_t seed() const noexcept { return m_seed; }
  std::uint64_t next_u64() { return m_engine(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform double in [lo, hi); returns lo exactly when lo == hi.
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n), unbiased.
  std::uint64_t index(std::uint64_t n);
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t integer(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();
  bool coin() { return (next_u64() >> 63) != 0; }

  /// Independent stream keyed by this stream's seed and `keys`.
  seeded_rng substream(std::initializer_list<std::uint64_t> keys) const {
    return seeded_rng(derive_seed(m_seed, keys));
  }

private:
  std::uint64_t m_seed;
  std::mt19937_64 m_engine;
  std::optional<double> m_spare;
};

}  // namespace siamgrid::augment
