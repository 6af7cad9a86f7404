#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "siamgrid/dataio/dataset.hpp"

namespace siamgrid::dataio {

enum class photometric { monochrome1, monochrome2 };

std::string to_string(photometric p);

struct manifest_record {
  std::string id;
  std::string path;
  photometric photometric_interpretation = photometric::monochrome2;
  double window_center = 0.5;
  double window_width = 1.0;
  double rescale_slope = 1.0;
  double rescale_intercept = 0.0;
  std::vector<label_t> labels;
  /// Values of the `meta.*` columns, in header order.
  std::vector<std::string> metadata;

  friend bool operator==(const manifest_record&, const manifest_record&) = default;
};

/**
 * Parsed manifest. Required columns come first in the header:
 *   id,path,photometric,window_center,window_width,rescale_slope,rescale_intercept
 * Every other column is a label unless its name starts with "meta.", in
 * which case it is carried through untouched.
 */
struct manifest {
  std::vector<std::string> label_names;
  std::vector<std::string> metadata_columns;
  std::vector<manifest_record> records;

  friend bool operator==(const manifest&, const manifest&) = default;
};

inline constexpr const char* manifest_required_columns[] = {
    "id", "path", "photometric", "window_center", "window_width", "rescale_slope", "rescale_intercept"};

/// Label cell text: "0", "1" or "NA" (empty cells are also read as NA).
label_t parse_label(const std::string& cell);
std::string format_label(label_t value);

/**
 * Reads a manifest CSV. Missing required columns raise schema_error; bad
 * cells raise row_error with the 1-based data row. When `check_paths` is set,
 * image paths (relative to the manifest's directory) must exist.
 */
manifest load_manifest(const std::filesystem::path& path, bool check_paths = true);
void write_manifest(const std::filesystem::path& path, const manifest& m);

/// Image path of a record resolved against the manifest location.
std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path, const manifest_record& r);

/// Loads every image through preprocess_raw into a dataset of out_size x out_size images.
dataset load_dataset(const std::filesystem::path& manifest_path, std::size_t out_size,
                     const std::string& dataset_tag = "manifest");

}  // namespace siamgrid::dataio
