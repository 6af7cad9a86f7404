#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "siamgrid/dataio/dataset.hpp"

namespace siamgrid::dataio {

enum class split_role { train, validation, evaluation };

std::string to_string(split_role role);

struct dataset_split {
  split_role role = split_role::train;
  std::vector<std::string> ids;
  /// Percentage of the parent set, when this is a fraction split.
  std::optional<double> fraction;
};

inline const std::vector<double> default_fractions{1.0, 10.0, 12.5, 25.0, 50.0, 100.0};

/**
 * Nested, label-stratified fraction splits of `ids`. Samples are grouped by
 * their full label combination and each group contributes a seeded-shuffle
 * prefix sized by largest-remainder allocation, so every split is a subset of
 * each larger one. Group allocations are then adjusted by single-unit moves
 * that bring each label's positive count as close as possible to its
 * proportional target. The result maps percentage to split, members in the
 * input order.
 */
std::map<double, dataset_split> stratified_split(const std::vector<std::string>& ids,
                                                 const std::vector<std::vector<label_t>>& labels,
                                                 const std::vector<double>& fractions, std::uint64_t seed,
                                                 split_role role = split_role::train);

/// Index form of stratified_split: sorted member indices per percentage.
std::map<double, std::vector<std::size_t>> stratified_indices(const std::vector<std::vector<label_t>>& labels,
                                                              const std::vector<double>& fractions,
                                                              std::uint64_t seed);

/**
 * Disjoint stratified partition into consecutive roles with the given sizes
 * (which must sum to at most the number of samples). Returns index lists.
 */
std::vector<std::vector<std::size_t>> stratified_partition(const std::vector<std::vector<label_t>>& labels,
                                                           const std::vector<std::size_t>& sizes,
                                                           std::uint64_t seed);

/**
 * Drops randomly chosen records whose only positive label is
 * `majority_label` until that label's prevalence is at most `target`. The
 * number dropped is the smallest that reaches the target. Returns kept
 * indices in input order.
 */
std::vector<std::size_t> balance_undersample(const std::vector<std::vector<label_t>>& labels,
                                             std::size_t majority_label, double target, std::uint64_t seed);

/// Fraction of records whose `label` is 1.
double prevalence(const std::vector<std::vector<label_t>>& labels, std::size_t label);

/// One id per line.
void write_id_file(const std::filesystem::path& path, const std::vector<std::string>& ids);
std::vector<std::string> read_id_file(const std::filesystem::path& path);

}  // namespace siamgrid::dataio
