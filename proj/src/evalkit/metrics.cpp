#include "siamgrid/evalkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "siamgrid/errors.hpp"

namespace siamgrid::evalkit {

void validate(const prediction_set& preds) {
  const std::size_t k = preds.num_labels();
  if (preds.labels.size() != preds.scores.size()) {
    throw dimension_error("prediction set: " + std::to_string(preds.scores.size()) + " score rows but " +
                          std::to_string(preds.labels.size()) + " label rows");
  }
  for (std::size_t i = 0; i < preds.scores.size(); ++i) {
    if (preds.scores[i].size() != k || preds.labels[i].size() != k) {
      throw dimension_error("prediction set: row " + std::to_string(i) + " does not have " + std::to_string(k) +
                            " entries");
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double s = preds.scores[i][j];
      if (!std::isfinite(s)) throw numeric_error("prediction set: non-finite score");
      if (s < 0.0 || s > 1.0) throw contract_error("prediction set: score outside [0,1]");
      const label_t y = preds.labels[i][j];
      if (y != 0 && y != 1 && y != label_na) throw contract_error("prediction set: label outside {0,1,NA}");
    }
  }
}

std::optional<double> auroc_label(std::span<const double> scores, std::span<const label_t> labels) {
  if (scores.size() != labels.size()) throw dimension_error("auroc: scores and labels differ in length");
  std::vector<std::pair<double, bool>> items;
  items.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 0 || labels[i] == 1) items.emplace_back(scores[i], labels[i] == 1);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double positives = 0.0, negatives = 0.0, wins = 0.0;
  for (std::size_t lo = 0; lo < items.size();) {
    std::size_t hi = lo;
    double p = 0.0, q = 0.0;
    while (hi < items.size() && items[hi].first == items[lo].first) {
      (items[hi].second ? p : q) += 1.0;
      ++hi;
    }
    // Positives in this tie group beat every lower negative and tie with q.
    wins += p * negatives + 0.5 * p * q;
    positives += p;
    negatives += q;
    lo = hi;
  }
  if (positives == 0.0 || negatives == 0.0) return std::nullopt;
  return wins / (positives * negatives);
}

std::vector<std::optional<double>> per_label_auroc(const prediction_set& preds) {
  validate(preds);
  const std::size_t n = preds.size(), k = preds.num_labels();
  std::vector<std::optional<double>> out(k);
  std::vector<double> s(n);
  std::vector<label_t> y(n);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = preds.scores[i][j];
      y[i] = preds.labels[i][j];
    }
    out[j] = auroc_label(s, y);
  }
  return out;
}

double macro_auroc(const prediction_set& preds) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& a : per_label_auroc(preds)) {
    if (!a) continue;
    acc += *a;
    ++count;
  }
  if (count == 0) throw contract_error("macro AUROC: no label has both classes present");
  return acc / static_cast<double>(count);
}

hamming_result hamming_detail(const prediction_set& preds, double threshold) {
  validate(preds);
  std::size_t mismatches = 0, cells = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < preds.num_labels(); ++j) {
      const label_t y = preds.labels[i][j];
      if (y == label_na) continue;
      const label_t predicted = preds.scores[i][j] >= threshold ? 1 : 0;
      mismatches += predicted != y;
      ++cells;
    }
  }
  hamming_result r;
  r.cells = cells;
  r.value = cells ? static_cast<double>(mismatches) / static_cast<double>(cells) : 0.0;
  return r;
}

double hamming_loss(const prediction_set& preds, double threshold) { return hamming_detail(preds, threshold).value; }

ranking_result ranking_detail(const prediction_set& preds) {
  validate(preds);
  ranking_result r;
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& y = preds.labels[i];
    const auto& s = preds.scores[i];
    std::size_t relevant = 0, irrelevant = 0, misranked = 0;
    for (std::size_t a = 0; a < y.size(); ++a) {
      if (y[a] == 1) ++relevant;
      if (y[a] == 0) ++irrelevant;
    }
    if (relevant == 0 || irrelevant == 0) {
      ++r.skipped;
      continue;
    }
    for (std::size_t a = 0; a < y.size(); ++a) {
      if (y[a] != 1) continue;
      for (std::size_t b = 0; b < y.size(); ++b) {
        if (y[b] == 0 && s[a] <= s[b]) ++misranked;
      }
    }
    acc += static_cast<double>(misranked) / static_cast<double>(relevant * irrelevant);
    ++r.evaluated;
  }
  if (r.evaluated == 0) throw contract_error("ranking error: no sample has both relevant and irrelevant labels");
  r.value = acc / static_cast<double>(r.evaluated);
  return r;
}

double ranking_error(const prediction_set& preds) { return ranking_detail(preds).value; }

}  // namespace siamgrid::evalkit
