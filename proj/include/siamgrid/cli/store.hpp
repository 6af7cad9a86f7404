#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "siamgrid/protocols/protocols.hpp"

namespace siamgrid::cli {

/**
 * Directory of runs plus an append-only `index.jsonl` of run records. Appends
 * take an exclusive lock on `index.lock`, so several processes may share a store.
 */
class run_store {
public:
  explicit run_store(std::filesystem::path root);

  const std::filesystem::path& root() const { return m_root; }

  /// `<root>/<phase>-<fingerprint[0:12]>`.
  std::filesystem::path run_dir(const std::string& phase, const std::string& fingerprint) const;

  /// Every indexed record in append order.
  std::vector<protocols::run_record> records() const;

  /// Latest record with this fingerprint.
  std::optional<protocols::run_record> find(const std::string& fingerprint) const;

  void append(const protocols::run_record& record);

private:
  std::filesystem::path m_root;
};

/// Store root from the flag, else $SIAMGRID_STORE, else ./runs.
std::filesystem::path default_store_root(const std::string& flag);

/// SHA-256 over the relative paths and bytes of every file under `dir`, in sorted order.
std::string directory_fingerprint(const std::filesystem::path& dir);

}  // namespace siamgrid::cli
