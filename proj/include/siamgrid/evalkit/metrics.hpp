#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace siamgrid::evalkit {

using label_t = std::int8_t;
inline constexpr label_t label_na = -1;

/// Post-sigmoid scores and ground truth for N samples and K labels.
struct prediction_set {
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<label_t>> labels;
  std::vector<std::string> label_names;
  std::string dataset_tag;

  std::size_t size() const { return scores.size(); }
  std::size_t num_labels() const { return label_names.size(); }
};

/// Shapes must agree, scores must be finite and in [0,1], labels in {0,1,NA}.
void validate(const prediction_set& preds);

/**
 * Mann-Whitney AUROC: mean over (positive, negative) pairs of
 * [s+ > s-] + 0.5 [s+ == s-]. NA entries are ignored. Returns nullopt when
 * fewer than one positive or one negative remains.
 */
std::optional<double> auroc_label(std::span<const double> scores, std::span<const label_t> labels);

/// Per-label AUROCs; entry k is nullopt when label k has a single class.
std::vector<std::optional<double>> per_label_auroc(const prediction_set& preds);

/// Unweighted mean of the defined per-label AUROCs. No defined label raises contract_error.
double macro_auroc(const prediction_set& preds);

struct hamming_result {
  double value = 0.0;
  std::size_t cells = 0;
};

/// Fraction of non-NA cells where [score >= threshold] differs from the label.
/// With no evaluable cell the value is 0 and `cells` is 0.
hamming_result hamming_detail(const prediction_set& preds, double threshold = 0.5);
double hamming_loss(const prediction_set& preds, double threshold = 0.5);

struct ranking_result {
  double value = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

/**
 * Normalized ranking error: per sample, the fraction of (relevant,
 * irrelevant) label pairs with s_relevant <= s_irrelevant, averaged over
 * samples having at least one of each. No such sample raises contract_error.
 */
ranking_result ranking_detail(const prediction_set& preds);
double ranking_error(const prediction_set& preds);

}  // namespace siamgrid::evalkit
