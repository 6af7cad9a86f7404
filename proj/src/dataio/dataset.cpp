#include "siamgrid/dataio/dataset.hpp"

#include <unordered_map>

#include "siamgrid/errors.hpp"

namespace siamgrid::dataio {

std::vector<std::vector<label_t>> dataset::label_matrix() const {
  std::vector<std::vector<label_t>> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.labels);
  return out;
}

std::vector<std::string> dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.id);
  return out;
}

dataset dataset::select(const std::vector<std::string>& wanted) const {
  std::unordered_map<std::string, std::size_t> where;
  where.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) where.emplace(items[i].id, i);
  dataset out;
  out.label_names = label_names;
  out.items.reserve(wanted.size());
  for (const auto& id : wanted) {
    const auto it = where.find(id);
    if (it == where.end()) throw contract_error("dataset select: unknown id '" + id + "'");
    out.items.push_back(items[it->second]);
  }
  return out;
}

void validate(const dataset& ds) {
  for (const auto& item : ds.items) {
    if (item.labels.size() != ds.label_names.size()) {
      throw contract_error("sample '" + item.id + "' has " + std::to_string(item.labels.size()) +
                           " labels, expected " + std::to_string(ds.label_names.size()));
    }
    for (label_t v : item.labels) {
      if (v != 0 && v != 1 && v != label_na) throw contract_error("sample '" + item.id + "' has an invalid label");
    }
  }
}

}  // namespace siamgrid::dataio
