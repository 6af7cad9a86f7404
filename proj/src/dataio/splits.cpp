#include "siamgrid/dataio/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "siamgrid/augment/rng.hpp"
#include "siamgrid/errors.hpp"

namespace siamgrid::dataio {

namespace {

// Samples sharing one exact label combination, in seeded-shuffle order.
struct label_group {
  std::vector<label_t> combo;
  std::vector<std::size_t> members;
};

std::vector<label_group> group_by_combination(const std::vector<std::vector<label_t>>& labels, std::uint64_t seed) {
  std::map<std::vector<label_t>, std::vector<std::size_t>> by_combo;
  for (std::size_t i = 0; i < labels.size(); ++i) by_combo[labels[i]].push_back(i);
  std::vector<label_group> groups;
  std::uint64_t ordinal = 0;
  for (auto& [combo, members] : by_combo) {
    augment::seeded_rng rng(augment::derive_seed(seed, {ordinal++}));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.index(i)]);
    groups.push_back({combo, std::move(members)});
  }
  return groups;
}

// Largest-remainder allocation of `total` units proportional to `quota`, capped per group.
std::vector<std::size_t> allocate(const std::vector<double>& quota, const std::vector<std::size_t>& cap,
                                  std::size_t total) {
  const std::size_t g = quota.size();
  std::vector<std::size_t> alloc(g);
  std::size_t used = 0;
  for (std::size_t i = 0; i < g; ++i) {
    alloc[i] = std::min(cap[i], static_cast<std::size_t>(std::floor(quota[i] + 1e-9)));
    used += alloc[i];
  }
  while (used < total) {
    std::size_t best = g;
    double best_gap = -1e300;
    for (std::size_t i = 0; i < g; ++i) {
      if (alloc[i] >= cap[i]) continue;
      const double gap = quota[i] - static_cast<double>(alloc[i]);
      if (gap > best_gap + 1e-12) {
        best_gap = gap;
        best = i;
      }
    }
    if (best == g) throw contract_error("stratified allocation: not enough samples for the requested size");
    ++alloc[best];
    ++used;
  }
  return alloc;
}

// Moves single units between groups while that reduces the squared deviation
// of every label's positive count from its proportional target.
void repair_marginals(std::vector<std::size_t>& alloc, const std::vector<std::size_t>& cap,
                      const std::vector<label_group>& groups, const std::vector<double>& target) {
  const std::size_t g = groups.size();
  const std::size_t k = target.size();
  std::vector<double> count(k, 0.0);
  for (std::size_t i = 0; i < g; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (groups[i].combo[j] == 1) count[j] += static_cast<double>(alloc[i]);
    }
  }
  for (;;) {
    double best_gain = 1e-9;
    std::size_t best_from = g, best_to = g;
    for (std::size_t from = 0; from < g; ++from) {
      if (alloc[from] == 0) continue;
      for (std::size_t to = 0; to < g; ++to) {
        if (to == from || alloc[to] >= cap[to]) continue;
        double gain = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          const int delta = (groups[to].combo[j] == 1) - (groups[from].combo[j] == 1);
          if (delta == 0) continue;
          const double before = count[j] - target[j];
          const double after = before + delta;
          gain += before * before - after * after;
        }
        if (gain > best_gain) {
          best_gain = gain;
          best_from = from;
          best_to = to;
        }
      }
    }
    if (best_from == g) return;
    --alloc[best_from];
    ++alloc[best_to];
    for (std::size_t j = 0; j < k; ++j) {
      count[j] += (groups[best_to].combo[j] == 1) - (groups[best_from].combo[j] == 1);
    }
  }
}

void check_labels(const std::vector<std::vector<label_t>>& labels) {
  if (labels.empty()) throw contract_error("stratified split: no records");
  for (const auto& row : labels) {
    if (row.size() != labels.front().size()) throw contract_error("stratified split: ragged label matrix");
  }
}

}  // namespace

std::string to_string(split_role role) {
  switch (role) {
    case split_role::train: return "train";
    case split_role::validation: return "validation";
    case split_role::evaluation: return "evaluation";
  }
  return "unknown";
}

double prevalence(const std::vector<std::vector<label_t>>& labels, std::size_t label) {
  if (labels.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& row : labels) pos += row.at(label) == 1;
  return static_cast<double>(pos) / static_cast<double>(labels.size());
}

std::map<double, std::vector<std::size_t>> stratified_indices(const std::vector<std::vector<label_t>>& labels,
                                                              const std::vector<double>& fractions,
                                                              std::uint64_t seed) {
  check_labels(labels);
  if (fractions.empty()) throw contract_error("stratified split: no fractions requested");
  std::vector<double> order = fractions;
  for (double f : order) {
    if (!(f > 0.0 && f <= 100.0)) throw contract_error("stratified split: fractions must lie in (0, 100]");
  }
  std::sort(order.begin(), order.end(), std::greater<>());
  order.erase(std::unique(order.begin(), order.end()), order.end());

  const auto groups = group_by_combination(labels, seed);
  const std::size_t n = labels.size();
  const std::size_t k = labels.front().size();
  std::vector<double> positives(k, 0.0);
  for (const auto& row : labels)
    for (std::size_t j = 0; j < k; ++j) positives[j] += row[j] == 1;

  std::vector<std::size_t> parent(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) parent[i] = groups[i].members.size();

  std::map<double, std::vector<std::size_t>> out;
  for (double f : order) {
    const double share = f / 100.0;
    const auto total = static_cast<std::size_t>(std::llround(static_cast<double>(n) * share));
    if (total < 1) {
      throw contract_error("stratified split: fraction " + std::to_string(f) + "% of " + std::to_string(n) +
                           " records yields no samples");
    }
    std::vector<double> quota(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) quota[i] = static_cast<double>(groups[i].members.size()) * share;
    auto alloc = allocate(quota, parent, total);
    std::vector<double> target(k);
    for (std::size_t j = 0; j < k; ++j) target[j] = positives[j] * share;
    repair_marginals(alloc, parent, groups, target);

    std::vector<std::size_t> members;
    members.reserve(total);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      members.insert(members.end(), groups[i].members.begin(),
                     groups[i].members.begin() + static_cast<std::ptrdiff_t>(alloc[i]));
    }
    std::sort(members.begin(), members.end());
    out.emplace(f, std::move(members));
    parent = std::move(alloc);
  }
  return out;
}

std::map<double, dataset_split> stratified_split(const std::vector<std::string>& ids,
                                                 const std::vector<std::vector<label_t>>& labels,
                                                 const std::vector<double>& fractions, std::uint64_t seed,
                                                 split_role role) {
  if (ids.size() != labels.size()) throw contract_error("stratified split: ids and labels differ in length");
  std::map<double, dataset_split> out;
  for (auto& [f, idx] : stratified_indices(labels, fractions, seed)) {
    dataset_split s;
    s.role = role;
    s.fraction = f;
    s.ids.reserve(idx.size());
    for (std::size_t i : idx) s.ids.push_back(ids[i]);
    out.emplace(f, std::move(s));
  }
  return out;
}

std::vector<std::vector<std::size_t>> stratified_partition(const std::vector<std::vector<label_t>>& labels,
                                                           const std::vector<std::size_t>& sizes,
                                                           std::uint64_t seed) {
  check_labels(labels);
  const std::size_t n = labels.size();
  if (std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) > n) {
    throw contract_error("stratified partition: requested sizes exceed the number of records");
  }
  const auto groups = group_by_combination(labels, seed);
  std::vector<std::size_t> taken(groups.size(), 0), remaining(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) remaining[i] = groups[i].members.size();

  std::vector<std::vector<std::size_t>> out;
  for (std::size_t size : sizes) {
    std::vector<double> quota(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
      quota[i] = static_cast<double>(groups[i].members.size()) * static_cast<double>(size) / static_cast<double>(n);
    }
    const auto alloc = allocate(quota, remaining, size);
    std::vector<std::size_t> part;
    part.reserve(size);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j = 0; j < alloc[i]; ++j) part.push_back(groups[i].members[taken[i] + j]);
      taken[i] += alloc[i];
      remaining[i] -= alloc[i];
    }
    std::sort(part.begin(), part.end());
    out.push_back(std::move(part));
  }
  return out;
}

std::vector<std::size_t> balance_undersample(const std::vector<std::vector<label_t>>& labels,
                                             std::size_t majority_label, double target, std::uint64_t seed) {
  check_labels(labels);
  if (majority_label >= labels.front().size()) throw contract_error("balance_undersample: majority label not present");
  if (!(target >= 0.0 && target < 1.0)) throw contract_error("balance_undersample: target must lie in [0, 1)");
  const std::size_t n = labels.size();
  std::size_t majority = 0;
  std::vector<std::size_t> majority_only;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i][majority_label] != 1) continue;
    ++majority;
    bool other = false;
    for (std::size_t j = 0; j < labels[i].size(); ++j) other = other || (j != majority_label && labels[i][j] == 1);
    if (!other) majority_only.push_back(i);
  }
  const double current = static_cast<double>(majority) / static_cast<double>(n);
  if (target > current + 1e-12) {
    throw contract_error("balance_undersample: target prevalence exceeds the current prevalence");
  }
  // Smallest d with (majority - d) / (n - d) <= target.
  const double exact = (static_cast<double>(majority) - target * static_cast<double>(n)) / (1.0 - target);
  const auto drop = static_cast<std::size_t>(std::max(0.0, std::ceil(exact - 1e-9)));
  std::vector<std::size_t> keep(n);
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  if (drop == 0) return keep;
  if (drop > majority_only.size()) {
    throw contract_error("balance_undersample: target unreachable by dropping majority-only records");
  }
  augment::seeded_rng rng(seed);
  for (std::size_t i = 0; i < drop; ++i) {
    const std::size_t j = i + rng.index(majority_only.size() - i);
    std::swap(majority_only[i], majority_only[j]);
  }
  std::vector<bool> dropped(n, false);
  for (std::size_t i = 0; i < drop; ++i) dropped[majority_only[i]] = true;
  keep.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (!dropped[i]) keep.push_back(i);
  }
  return keep;
}

void write_id_file(const std::filesystem::path& path, const std::vector<std::string>& ids) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write id file " + path.string());
  for (const auto& id : ids) out << id << '\n';
  if (!out) throw io_error("failed writing id file " + path.string());
}

std::vector<std::string> read_id_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open id file " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

}  // namespace siamgrid::dataio
