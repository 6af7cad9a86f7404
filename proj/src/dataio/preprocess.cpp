#include "siamgrid/dataio/preprocess.hpp"

#include <algorithm>

#include "siamgrid/errors.hpp"

namespace siamgrid::dataio {

augment::image preprocess_raw(const raw_image& raw, const manifest_record& meta, std::size_t out_size) {
  if (!(meta.window_width > 0.0)) throw contract_error("preprocess_raw: window width must be positive");
  if (raw.height == 0 || raw.width == 0 || raw.values.size() != raw.height * raw.width) {
    throw dimension_error("preprocess_raw: raw array is empty or inconsistent");
  }
  if (out_size == 0) throw contract_error("preprocess_raw: output size must be >= 1");
  const double low = meta.window_center - meta.window_width / 2.0;
  const bool invert = meta.photometric_interpretation == photometric::monochrome1;
  augment::image img(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    const double v1 = static_cast<double>(raw.values[i]) * meta.rescale_slope + meta.rescale_intercept;
    double v2 = std::clamp((v1 - low) / meta.window_width, 0.0, 1.0);
    if (invert) v2 = 1.0 - v2;
    img.pixels[i] = static_cast<float>(v2);
  }
  if (raw.height == out_size && raw.width == out_size) return img;
  auto out = augment::resize_bilinear(img, out_size, out_size);
  augment::clamp_unit(out);
  return out;
}

}  // namespace siamgrid::dataio
