#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "siamgrid/augment/image.hpp"

namespace siamgrid::dataio {

/// Label cell: 0, 1, or label_na when the condition was not annotated.
using label_t = std::int8_t;
inline constexpr label_t label_na = -1;

struct labeled_image {
  std::string id;
  augment::image image;
  std::vector<label_t> labels;
  std::string dataset_tag;
};

/// In-memory dataset: the class list plus the samples carrying one label per class.
struct dataset {
  std::vector<std::string> label_names;
  std::vector<labeled_image> items;

  std::size_t size() const noexcept { return items.size(); }
  std::vector<std::vector<label_t>> label_matrix() const;
  std::vector<std::string> ids() const;
  /// Subset in the order of `ids`; throws contract_error for an unknown id.
  dataset select(const std::vector<std::string>& ids) const;
};

/// Throws contract_error when a sample's label vector length differs from the class list.
void validate(const dataset& ds);

}  // namespace siamgrid::dataio
