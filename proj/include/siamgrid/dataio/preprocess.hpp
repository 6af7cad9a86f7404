#pragma once

#include "siamgrid/dataio/manifest.hpp"
#include "siamgrid/dataio/png_io.hpp"

namespace siamgrid::dataio {

/**
 * Rescale (raw * slope + intercept), window to [center - width/2, center + width/2]
 * mapped onto [0, 1], invert for MONOCHROME1, then bilinear resize to out_size.
 */
augment::image preprocess_raw(const raw_image& raw, const manifest_record& meta, std::size_t out_size = 224);

}  // namespace siamgrid::dataio
