#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "siamgrid/diffcore/tensor.hpp"

namespace siamgrid::diffcore::inline SIAMGRID_PRECISION_NS {

struct parameter {
  std::string name;
  tensor value;
};

/// Ordered, name-unique collection of trainable tensors and non-trainable buffers.
class parameter_registry {
public:
  /// Registers a trainable tensor; sets requires_grad. Duplicate names are rejected.
  void add(const std::string& name, tensor value);
  /// Registers persistent state that is checkpointed but never optimised.
  void add_buffer(const std::string& name, tensor value);

  const std::vector<parameter>& parameters() const { return m_params; }
  const std::vector<parameter>& buffers() const { return m_buffers; }
  const tensor& find(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<tensor> tensors() const;
  void zero_grad();
  void set_trainable(bool trainable);

private:
  void check_unique(const std::string& name) const;

  std::vector<parameter> m_params;
  std::vector<parameter> m_buffers;
};

/// Writes `manifest.json` plus one little-endian float32 file per tensor.
void save_checkpoint(const std::filesystem::path& dir, const std::vector<parameter>& tensors);

/// Reads every tensor listed in `dir/manifest.json`.
std::map<std::string, tensor> load_checkpoint(const std::filesystem::path& dir);

/// Copies checkpointed values into the registry; shapes must match exactly.
void restore_registry(parameter_registry& registry, const std::filesystem::path& dir);
void save_registry(const parameter_registry& registry, const std::filesystem::path& dir);

}  // namespace siamgrid::diffcore
