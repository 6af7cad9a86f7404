#include "siamgrid/augment/image.hpp"

#include <algorithm>
#include <cmath>

#include "siamgrid/errors.hpp"

namespace siamgrid::augment {

image resize_bilinear(const image& src, const box& region, std::size_t out_h, std::size_t out_w) {
  if (src.empty() || region.height == 0 || region.width == 0) throw dimension_error("resize of an empty image");
  if (out_h == 0 || out_w == 0) throw dimension_error("resize to an empty size");
  if (region.top + region.height > src.height || region.left + region.width > src.width) {
    throw dimension_error("resize region exceeds image bounds");
  }
  image out(out_h, out_w);
  const double sy = static_cast<double>(region.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(region.width) / static_cast<double>(out_w);
  const double max_y = static_cast<double>(region.height - 1);
  const double max_x = static_cast<double>(region.width - 1);

  std::vector<std::size_t> x0(out_w), x1(out_w);
  std::vector<float> wx(out_w);
  for (std::size_t x = 0; x < out_w; ++x) {
    const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
    const auto base = static_cast<std::size_t>(std::floor(fx));
    x0[x] = region.left + base;
    x1[x] = region.left + std::min(base + 1, region.width - 1);
    wx[x] = static_cast<float>(fx - static_cast<double>(base));
  }
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto base = static_cast<std::size_t>(std::floor(fy));
    const std::size_t y0 = region.top + base;
    const std::size_t y1 = region.top + std::min(base + 1, region.height - 1);
    const float wy = static_cast<float>(fy - static_cast<double>(base));
    // a + w * (b - a) is exact for equal neighbours, so flat regions stay flat.
    auto lerp = [](float a, float b, float w) { return a + w * (b - a); };
    for (std::size_t x = 0; x < out_w; ++x) {
      const float top = lerp(src.at(y0, x0[x]), src.at(y0, x1[x]), wx[x]);
      const float bottom = lerp(src.at(y1, x0[x]), src.at(y1, x1[x]), wx[x]);
      out.at(y, x) = lerp(top, bottom, wy);
    }
  }
  return out;
}

image resize_bilinear(const image& src, std::size_t out_h, std::size_t out_w) {
  return resize_bilinear(src, box{0, 0, src.height, src.width}, out_h, out_w);
}

std::ptrdiff_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
  const std::ptrdiff_t period = 2 * n;
  std::ptrdiff_t r = i % period;
  if (r < 0) r += period;
  return r < n ? r : period - 1 - r;
}

void clamp_unit(image& img) {
  for (auto& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
}

double mean_intensity(const image& img) {
  if (img.empty()) return 0.0;
  double acc = 0.0;
  for (float p : img.pixels) acc += p;
  return acc / static_cast<double>(img.pixels.size());
}

}  // namespace siamgrid::augment
