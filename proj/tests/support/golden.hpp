#pragma once

#include <filesystem>

#include "siamgrid/augment/image.hpp"
#include "siamgrid/augment/policy.hpp"

namespace siamgrid::testing {

std::filesystem::path fixture_dir();

/// Deterministic 20 x 24 test image with smooth and high-frequency content.
augment::image golden_input();

/// `kind` with its default parameters applied to golden_input() under a fixed per-kind seed.
augment::image golden_output(augment::aug_kind kind);

std::filesystem::path golden_path(augment::aug_kind kind);

/// Raw layout: uint32 height, uint32 width, then little-endian float32 pixels.
void write_raw_image(const std::filesystem::path& path, const augment::image& img);
augment::image read_raw_image(const std::filesystem::path& path);

}  // namespace siamgrid::testing
