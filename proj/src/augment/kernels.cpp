#include "siamgrid/augment/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "siamgrid/errors.hpp"

namespace siamgrid::augment {

namespace {

constexpr int k_attempts = 10;

void require_nonempty(const image& img, const char* op) {
  if (img.empty() || img.height == 0 || img.width == 0) {
    throw dimension_error(std::string(op) + ": empty image");
  }
}

void note(draw_trace* trace, const char* name, double value) {
  if (trace) trace->add(name, value);
}

std::size_t round_to_size(double v) { return static_cast<std::size_t>(std::llround(v)); }

}  // namespace

std::optional<double> draw_trace::get(const std::string& name) const {
  for (const auto& [k, v] : draws) {
    if (k == name) return v;
  }
  return std::nullopt;
}

crop_sample sample_crop(std::size_t h, std::size_t w, range scale, range ratio, seeded_rng& rng) {
  if (h == 0 || w == 0) throw dimension_error("random_resized_crop: empty image");
  if (!(scale.lo > 0.0 && scale.lo <= scale.hi && scale.hi <= 1.0)) {
    throw contract_error("random_resized_crop: scale range must satisfy 0 < lo <= hi <= 1");
  }
  if (!(ratio.lo > 0.0 && ratio.lo <= ratio.hi)) throw contract_error("random_resized_crop: invalid ratio range");
  const double area = static_cast<double>(h * w);
  const double log_lo = std::log(ratio.lo), log_hi = std::log(ratio.hi);
  crop_sample s;
  for (int attempt = 0; attempt < k_attempts; ++attempt) {
    const double frac = rng.uniform(scale.lo, scale.hi);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const std::size_t cw = round_to_size(std::sqrt(area * frac * aspect));
    const std::size_t ch = round_to_size(std::sqrt(area * frac / aspect));
    if (cw > 0 && ch > 0 && cw <= w && ch <= h) {
      s.region.top = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(h - ch)));
      s.region.left = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(w - cw)));
      s.region.height = ch;
      s.region.width = cw;
      s.target_scale = frac;
      s.target_ratio = aspect;
      return s;
    }
  }
  // Centre crop with the aspect clamped into the allowed range.
  const double in_ratio = static_cast<double>(w) / static_cast<double>(h);
  std::size_t cw = w, ch = h;
  if (in_ratio < ratio.lo) {
    ch = std::min(h, std::max<std::size_t>(1, round_to_size(static_cast<double>(w) / ratio.lo)));
  } else if (in_ratio > ratio.hi) {
    cw = std::min(w, std::max<std::size_t>(1, round_to_size(static_cast<double>(h) * ratio.hi)));
  }
  s.region = box{(h - ch) / 2, (w - cw) / 2, ch, cw};
  s.target_scale = static_cast<double>(ch * cw) / area;
  s.target_ratio = static_cast<double>(cw) / static_cast<double>(ch);
  s.fallback = true;
  return s;
}

image random_resized_crop(const image& img, range scale, range ratio, std::size_t out_h, std::size_t out_w,
                          seeded_rng& rng, draw_trace* trace) {
  require_nonempty(img, "random_resized_crop");
  if (out_h == 0 || out_w == 0) throw contract_error("random_resized_crop: output size must be >= 1");
  const auto s = sample_crop(img.height, img.width, scale, ratio, rng);
  note(trace, "scale", s.target_scale);
  note(trace, "ratio", s.target_ratio);
  note(trace, "area_fraction",
       static_cast<double>(s.region.height * s.region.width) / static_cast<double>(img.height * img.width));
  note(trace, "fallback", s.fallback ? 1.0 : 0.0);
  image out = resize_bilinear(img, s.region, out_h, out_w);
  clamp_unit(out);
  return out;
}

image rotate_by(const image& img, double degrees) {
  require_nonempty(img, "rotate");
  if (degrees == 0.0) return img;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  const auto h = static_cast<std::ptrdiff_t>(img.height), w = static_cast<std::ptrdiff_t>(img.width);
  auto tap = [&](std::ptrdiff_t y, std::ptrdiff_t x) -> float {
    return (y < 0 || x < 0 || y >= h || x >= w) ? 0.0f : img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  image out(img.height, img.width);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      // inverse of the counter-clockwise (as displayed, y down) rotation
      const double sx = cx + c * dx - s * dy;
      const double sy = cy + s * dx + c * dy;
      const double fx0 = std::floor(sx), fy0 = std::floor(sy);
      const auto x0 = static_cast<std::ptrdiff_t>(fx0), y0 = static_cast<std::ptrdiff_t>(fy0);
      const float wx = static_cast<float>(sx - fx0), wy = static_cast<float>(sy - fy0);
      const float top = (1.0f - wx) * tap(y0, x0) + wx * tap(y0, x0 + 1);
      const float bottom = (1.0f - wx) * tap(y0 + 1, x0) + wx * tap(y0 + 1, x0 + 1);
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = (1.0f - wy) * top + wy * bottom;
    }
  }
  clamp_unit(out);
  return out;
}

image rotate(const image& img, double max_degrees, seeded_rng& rng, draw_trace* trace) {
  if (!(max_degrees >= 0.0 && max_degrees <= 180.0)) throw contract_error("rotate: degrees must lie in [0, 180]");
  const double angle = rng.uniform(-max_degrees, max_degrees);
  note(trace, "degrees", angle);
  return rotate_by(img, angle);
}

std::optional<box> sample_erase_box(std::size_t h, std::size_t w, range scale, range ratio, seeded_rng& rng) {
  if (!(scale.lo > 0.0 && scale.lo <= scale.hi && scale.hi < 1.0)) {
    throw contract_error("cutout: scale range must satisfy 0 < lo <= hi < 1");
  }
  if (!(ratio.lo > 0.0 && ratio.lo <= ratio.hi)) throw contract_error("cutout: invalid ratio range");
  const double area = static_cast<double>(h * w);
  const double log_lo = std::log(ratio.lo), log_hi = std::log(ratio.hi);
  for (int attempt = 0; attempt < k_attempts; ++attempt) {
    const double frac = rng.uniform(scale.lo, scale.hi);
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const std::size_t eh = round_to_size(std::sqrt(area * frac * aspect));
    const std::size_t ew = round_to_size(std::sqrt(area * frac / aspect));
    if (eh == 0 || ew == 0 || eh >= h || ew >= w) continue;
    const double realised = static_cast<double>(eh * ew) / area;
    if (realised < scale.lo || realised > scale.hi) continue;
    const auto top = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(h - eh)));
    const auto left = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(w - ew)));
    return box{top, left, eh, ew};
  }
  return std::nullopt;
}

image cutout(const image& img, range scale, range ratio, seeded_rng& rng, draw_trace* trace) {
  require_nonempty(img, "cutout");
  image out = img;
  const auto b = sample_erase_box(img.height, img.width, scale, ratio, rng);
  if (!b) {
    note(trace, "skipped", 1.0);
    return out;
  }
  note(trace, "area_fraction", static_cast<double>(b->height * b->width) / static_cast<double>(img.height * img.width));
  note(trace, "top", static_cast<double>(b->top));
  note(trace, "left", static_cast<double>(b->left));
  note(trace, "height", static_cast<double>(b->height));
  note(trace, "width", static_cast<double>(b->width));
  for (std::size_t y = b->top; y < b->top + b->height; ++y)
    for (std::size_t x = b->left; x < b->left + b->width; ++x) out.at(y, x) = 0.0f;
  return out;
}

image adjust_brightness(const image& img, double factor) {
  if (factor == 1.0) return img;
  image out = img;
  const float f = static_cast<float>(factor);
  for (auto& p : out.pixels) p = std::clamp(p * f, 0.0f, 1.0f);
  return out;
}

image adjust_contrast(const image& img, double factor) {
  if (factor == 1.0) return img;
  image out = img;
  const float m = static_cast<float>(mean_intensity(img));
  const float f = static_cast<float>(factor);
  for (auto& p : out.pixels) p = std::clamp((p - m) * f + m, 0.0f, 1.0f);
  return out;
}

image distort(const image& img, double lambda, seeded_rng& rng, draw_trace* trace) {
  require_nonempty(img, "distort");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw contract_error("distort: lambda must lie in [0, 1]");
  const double lo = std::max(0.0, 1.0 - lambda), hi = 1.0 + lambda;
  const double brightness = rng.uniform(lo, hi);
  const double contrast = rng.uniform(lo, hi);
  const bool brightness_first = rng.coin();
  note(trace, "brightness", brightness);
  note(trace, "contrast", contrast);
  note(trace, "brightness_first", brightness_first ? 1.0 : 0.0);
  if (brightness_first) return adjust_contrast(adjust_brightness(img, brightness), contrast);
  return adjust_brightness(adjust_contrast(img, contrast), brightness);
}

image gaussian_noise(const image& img, range sigma, seeded_rng& rng, draw_trace* trace) {
  require_nonempty(img, "gaussian_noise");
  if (!(sigma.lo >= 0.0 && sigma.lo <= sigma.hi)) throw contract_error("gaussian_noise: invalid sigma range");
  const double s = rng.uniform(sigma.lo, sigma.hi);
  note(trace, "sigma", s);
  if (s == 0.0) return img;
  image out = img;
  for (auto& p : out.pixels) p = std::clamp(static_cast<float>(p + s * rng.normal()), 0.0f, 1.0f);
  return out;
}

std::vector<float> gaussian_kernel1d(int kernel_size, double sigma) {
  if (kernel_size < 1 || kernel_size % 2 == 0) throw contract_error("gaussian_blur: kernel size must be odd");
  if (!(sigma > 0.0)) throw contract_error("gaussian_blur: sigma must be positive");
  const int r = kernel_size / 2;
  std::vector<double> taps(static_cast<std::size_t>(kernel_size));
  double total = 0.0;
  for (int i = 0; i < kernel_size; ++i) {
    const double d = static_cast<double>(i - r);
    taps[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    total += taps[static_cast<std::size_t>(i)];
  }
  std::vector<float> out(taps.size());
  for (std::size_t i = 0; i < taps.size(); ++i) out[i] = static_cast<float>(taps[i] / total);
  return out;
}

image blur_with_sigma(const image& img, int kernel_size, double sigma) {
  require_nonempty(img, "gaussian_blur");
  const auto taps = gaussian_kernel1d(kernel_size, sigma);
  const auto k = static_cast<std::size_t>(kernel_size);
  if (k > 2 * img.height || k > 2 * img.width) {
    throw dimension_error("gaussian_blur: kernel of size " + std::to_string(k) + " exceeds twice the image size");
  }
  const auto r = static_cast<std::ptrdiff_t>(k / 2);
  const auto h = static_cast<std::ptrdiff_t>(img.height), w = static_cast<std::ptrdiff_t>(img.width);
  image tmp(img.height, img.width), out(img.height, img.width);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (std::ptrdiff_t t = -r; t <= r; ++t) {
        acc += taps[static_cast<std::size_t>(t + r)] *
               img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(reflect_index(x + t, w)));
      }
      tmp.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
    }
  }
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (std::ptrdiff_t t = -r; t <= r; ++t) {
        acc += taps[static_cast<std::size_t>(t + r)] *
               tmp.at(static_cast<std::size_t>(reflect_index(y + t, h)), static_cast<std::size_t>(x));
      }
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
    }
  }
  clamp_unit(out);
  return out;
}

image gaussian_blur(const image& img, int kernel_size, range sigma, seeded_rng& rng, draw_trace* trace) {
  if (!(sigma.lo > 0.0 && sigma.lo <= sigma.hi)) throw contract_error("gaussian_blur: invalid sigma range");
  const double s = rng.uniform(sigma.lo, sigma.hi);
  note(trace, "sigma", s);
  return blur_with_sigma(img, kernel_size, s);
}

image sobel(const image& img) {
  if (img.height < 3 || img.width < 3) throw dimension_error("sobel: image smaller than the 3x3 kernel");
  const auto h = static_cast<std::ptrdiff_t>(img.height), w = static_cast<std::ptrdiff_t>(img.width);
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) -> double {
    return img.at(static_cast<std::size_t>(reflect_index(y, h)), static_cast<std::size_t>(reflect_index(x, w)));
  };
  image out(img.height, img.width);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double gx = (px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y, x - 1) + px(y + 1, x - 1));
      const double gy = (px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y - 1, x) + px(y - 1, x + 1));
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
          static_cast<float>(std::sqrt(gx * gx + gy * gy) / sobel_max_response);
    }
  }
  clamp_unit(out);
  return out;
}

}  // namespace siamgrid::augment
