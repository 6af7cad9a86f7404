#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "siamgrid/evalkit/metrics.hpp"

namespace siamgrid::evalkit {

struct metrics_report {
  std::string dataset_tag;
  double macro_auroc = 0.0;
  /// Label name with its AUROC, or nullopt when the label had a single class.
  std::vector<std::pair<std::string, std::optional<double>>> per_label_auroc;
  double hamming_loss = 0.0;
  double ranking_error = 0.0;
  std::size_t n_samples = 0;
  std::size_t labels_evaluated = 0;
  std::vector<std::string> skipped_labels;
  std::size_t skipped_samples = 0;
  double threshold = 0.5;

  friend bool operator==(const metrics_report&, const metrics_report&) = default;
};

metrics_report report_build(const prediction_set& preds, double threshold = 0.5);

/// Single-line JSON record; parse_report_line inverts it exactly.
std::string to_json_line(const metrics_report& report);
metrics_report parse_report_line(const std::string& line);

/// One table row: a strategy name and its report.
struct report_row {
  std::string name;
  metrics_report report;
};

/// Strategy rows by label columns, followed by macro AUROC, Hamming loss and
/// normalized ranking error. Labels missing from a row render as NA.
std::string render_csv(const std::vector<report_row>& rows);
std::string render_text(const std::vector<report_row>& rows, int precision = 3);

}  // namespace siamgrid::evalkit
