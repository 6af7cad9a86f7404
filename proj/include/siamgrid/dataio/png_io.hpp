#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "siamgrid/augment/image.hpp"

namespace siamgrid::dataio {

/// Integer pixel array as stored on disk, before any intensity mapping.
struct raw_image {
  std::size_t height = 0;
  std::size_t width = 0;
  int bit_depth = 8;
  std::vector<std::int32_t> values;
};

/// Reads an 8- or 16-bit grayscale PNG (other colour types raise io_error).
raw_image read_png_raw(const std::filesystem::path& path);
/// Reads a grayscale PNG scaled to [0, 1] by its maximum code value.
augment::image read_png(const std::filesystem::path& path);

void write_png_raw(const std::filesystem::path& path, const raw_image& raw);
/// Writes [0, 1] intensities quantized (round to nearest) to 8 or 16 bits.
void write_png(const std::filesystem::path& path, const augment::image& img, int bit_depth = 16);

}  // namespace siamgrid::dataio
