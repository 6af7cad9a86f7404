#include "siamgrid/dataio/batching.hpp"

#include <numeric>

#include "siamgrid/augment/rng.hpp"
#include "siamgrid/errors.hpp"

namespace siamgrid::dataio {

std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t shuffle_seed,
                                                 std::uint64_t epoch, bool shuffle) {
  if (batch_size < 1) throw contract_error("batch_iter: batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle && n > 1) {
    augment::seeded_rng rng(augment::derive_seed(shuffle_seed, {epoch}));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace siamgrid::dataio
