#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "siamgrid/dataio/dataset.hpp"

namespace siamgrid::dataio {

/// Number of distinct label patterns the generator can draw.
inline constexpr std::size_t synth_pattern_count = 8;

/// Label name of pattern k, e.g. "nodule".
std::string_view synth_pattern_name(std::size_t k);

struct synthetic_config {
  std::size_t n_samples = 6000;
  std::size_t image_size = 64;
  std::size_t K = 4;
  std::vector<double> prevalences{0.3, 0.3, 0.3, 0.3};
  std::uint64_t seed = 0;
  double difficulty = 0.5;
  /// Scale of the per-image exposure and placement variation; 1 is the reference range.
  double nuisance = 1.0;
  /// Index of the first sample; samples are a pure function of (seed, index).
  std::uint64_t first_index = 0;
  /// Additional pixel noise, used to build shifted evaluation sets.
  double extra_noise = 0.0;
  std::string dataset_tag = "synthetic";
};

/// Throws contract_error for K > synth_pattern_count or out-of-range fields.
void validate(const synthetic_config& config);

/**
 * Chest-radiograph-like samples: two bright lung ellipses on a dark field
 * with per-image exposure, placement and noise variation. Each positive
 * label k superimposes pattern k with amplitude proportional to difficulty.
 * Labels are independent Bernoulli draws with the configured prevalences.
 */
dataset synth_generate(const synthetic_config& config);

/// Labels only, identical to the labels synth_generate would draw.
std::vector<std::vector<label_t>> synth_labels(const synthetic_config& config);

/// Same geometry with shifted prevalences and extra noise, for transfer tests.
synthetic_config shifted(const synthetic_config& base, const std::vector<double>& prevalences, double extra_noise);

}  // namespace siamgrid::dataio
