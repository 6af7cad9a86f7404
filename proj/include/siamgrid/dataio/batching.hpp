#pragma once

#include <cstdint>
#include <vector>

namespace siamgrid::dataio {

/**
 * Batches of indices into a split of size n for one epoch. The permutation
 * is derived from (shuffle_seed, epoch); the last batch may be partial.
 */
std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t shuffle_seed,
                                                 std::uint64_t epoch, bool shuffle = true);

}  // namespace siamgrid::dataio
