#pragma once

#include <cstddef>
#include <vector>

namespace siamgrid::augment {

/// Single-channel image, row-major, intensities in [0, 1].
struct image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  image() = default;
  image(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), pixels(h * w, fill) {}

  bool empty() const noexcept { return pixels.empty(); }
  float& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  float at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  friend bool operator==(const image&, const image&) = default;
};

/// Axis-aligned integer rectangle inside an image.
struct box {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t height = 0;
  std::size_t width = 0;
};

/**
 * Bilinear resampling of `region` of `src` to out_h x out_w using half-pixel
 * centres. Sample coordinates are clamped to the region, so resizing a region
 * to its own size is the exact identity.
 */
image resize_bilinear(const image& src, const box& region, std::size_t out_h, std::size_t out_w);
image resize_bilinear(const image& src, std::size_t out_h, std::size_t out_w);

/// Half-sample symmetric reflection of an index into [0, n).
std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n);

void clamp_unit(image& img);

double mean_intensity(const image& img);

}  // namespace siamgrid::augment
