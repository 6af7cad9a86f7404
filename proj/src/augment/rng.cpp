#include "siamgrid/augment/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "siamgrid/errors.hpp"

namespace siamgrid::augment {

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(seed);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ull));
  return h;
}

double seeded_rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double seeded_rng::uniform(double lo, double hi) {
  const double u = uniform();
  if (lo == hi) return lo;
  return lo + (hi - lo) * u;
}

std::uint64_t seeded_rng::index(std::uint64_t n) {
  if (n == 0) throw contract_error("seeded_rng::index: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

std::int64_t seeded_rng::integer(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw contract_error("seeded_rng::integer: empty range");
  return lo + static_cast<std::int64_t>(index(static_cast<std::uint64_t>(hi - lo) + 1));
}

double seeded_rng::normal() {
  if (m_spare) {
    const double v = *m_spare;
    m_spare.reset();
    return v;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  m_spare = r * std::sin(theta);
  return r * std::cos(theta);
}

}  // namespace siamgrid::augment
