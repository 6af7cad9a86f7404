#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "siamgrid/augment/policy.hpp"
#include "siamgrid/dataio/synth.hpp"
#include "siamgrid/protocols/protocols.hpp"
#include "siamgrid/simsiam/model.hpp"

namespace siamgrid::cli {

/// Section name to key to raw value. Every known key is always present.
using config_document = std::map<std::string, std::map<std::string, std::string>>;

/// Every section and key with its default value.
const config_document& config_defaults();

/**
 * Defaults overlaid with each file in order. A top-level `include = PATH`
 * (relative to the including file) is applied before the file's own keys.
 * Unknown sections or keys raise config_error naming all of them.
 */
config_document load_config(const std::vector<std::filesystem::path>& files);

/// Applies "section.key=value" overrides with the same strictness.
void apply_override(config_document& doc, const std::string& section, const std::string& key,
                    const std::string& value);

/// Canonical INI text: sections and keys sorted, one `key = value` per line.
std::string render(const config_document& doc);

/// Lower-case hex SHA-256 of the version tag, the canonical text and the parent fingerprints.
std::string fingerprint(const config_document& doc, const std::map<std::string, std::string>& parents = {});
std::string sha256_hex(const std::string& bytes);
std::string version_tag();

struct data_settings {
  std::string source = "synthetic";
  std::filesystem::path manifest;
  std::size_t image_size = 64;
  dataio::synthetic_config synthetic;
  std::size_t n_train = 6000;
  std::size_t n_eval = 1000;
  std::size_t n_validation = 0;
  std::filesystem::path train_ids, eval_ids, validation_ids;
  std::vector<double> shift_prevalences;
  double shift_noise = 0.0;
  double fraction = 100.0;
};

struct run_settings {
  data_settings data;
  augment::view_policy policy;
  std::vector<augment::aug_kind> pool;
  simsiam::model_config model;
  protocols::optim_settings pretrain, probe, finetune, supervised;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  double threshold = 0.5;
  protocols::init_kind init = protocols::init_kind::scratch;
  protocols::label_map label_map;
  std::vector<double> fractions;
  std::uint64_t split_seed = 0;
};

/// Typed view of a document; malformed values raise config_error listing every offending key.
run_settings resolve(const config_document& doc);

}  // namespace siamgrid::cli
