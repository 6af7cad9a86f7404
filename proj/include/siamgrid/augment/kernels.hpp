#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "siamgrid/augment/image.hpp"
#include "siamgrid/augment/rng.hpp"

namespace siamgrid::augment {

struct range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const range&, const range&) = default;
};

/// Optional record of the random parameters a kernel drew, for inspection in tests.
struct draw_trace {
  std::vector<std::pair<std::string, double>> draws;

  void add(std::string name, double value) { draws.emplace_back(std::move(name), value); }
  std::optional<double> get(const std::string& name) const;
};

struct crop_sample {
  box region;
  double target_scale = 1.0;   // sampled area fraction
  double target_ratio = 1.0;   // sampled aspect (w / h)
  bool fallback = false;       // true when the centre-crop fallback was used
};

/// Samples a crop window: area fraction in `scale`, log-uniform aspect in `ratio`, 10 attempts.
crop_sample sample_crop(std::size_t h, std::size_t w, range scale, range ratio, seeded_rng& rng);

image random_resized_crop(const image& img, range scale, range ratio, std::size_t out_h, std::size_t out_w,
                          seeded_rng& rng, draw_trace* trace = nullptr);

/// Rotation by `degrees` about the image centre, bilinear, zero fill outside.
image rotate_by(const image& img, double degrees);
image rotate(const image& img, double max_degrees, seeded_rng& rng, draw_trace* trace = nullptr);

/// Samples an erase rectangle whose realised area fraction lies in `scale`; nullopt after 10 misses.
std::optional<box> sample_erase_box(std::size_t h, std::size_t w, range scale, range ratio, seeded_rng& rng);
image cutout(const image& img, range scale, range ratio, seeded_rng& rng, draw_trace* trace = nullptr);

image adjust_brightness(const image& img, double factor);
image adjust_contrast(const image& img, double factor);
image distort(const image& img, double lambda, seeded_rng& rng, draw_trace* trace = nullptr);

image gaussian_noise(const image& img, range sigma, seeded_rng& rng, draw_trace* trace = nullptr);

/// Normalised 1-D Gaussian taps of odd length `kernel_size`.
std::vector<float> gaussian_kernel1d(int kernel_size, double sigma);
image blur_with_sigma(const image& img, int kernel_size, double sigma);
image gaussian_blur(const image& img, int kernel_size, range sigma, seeded_rng& rng, draw_trace* trace = nullptr);

/// Largest Sobel gradient magnitude an image in [0, 1] can produce.
inline constexpr double sobel_max_response = 5.656854249492380195;  // 4 * sqrt(2)
image sobel(const image& img);

}  // namespace siamgrid::augment
