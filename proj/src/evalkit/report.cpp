#include "siamgrid/evalkit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

#include "siamgrid/errors.hpp"

namespace siamgrid::evalkit {

using json = nlohmann::json;

namespace {

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Label columns in order of first appearance across rows.
std::vector<std::string> label_columns(const std::vector<report_row>& rows) {
  std::vector<std::string> names;
  for (const auto& row : rows) {
    for (const auto& [name, value] : row.report.per_label_auroc) {
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
  }
  return names;
}

std::optional<double> lookup(const metrics_report& r, const std::string& name) {
  for (const auto& [n, v] : r.per_label_auroc) {
    if (n == name) return v;
  }
  return std::nullopt;
}

std::vector<std::vector<std::string>> table_cells(const std::vector<report_row>& rows, int precision) {
  const auto labels = label_columns(rows);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"strategy"};
  header.insert(header.end(), labels.begin(), labels.end());
  header.insert(header.end(), {"macro_auroc", "hamming_loss", "normalized_ranking_error"});
  cells.push_back(header);
  for (const auto& row : rows) {
    std::vector<std::string> line{row.name};
    for (const auto& label : labels) {
      const auto v = lookup(row.report, label);
      line.push_back(v ? fixed(*v, precision) : "NA");
    }
    line.push_back(fixed(row.report.macro_auroc, precision));
    line.push_back(fixed(row.report.hamming_loss, precision));
    line.push_back(fixed(row.report.ranking_error, precision));
    cells.push_back(std::move(line));
  }
  return cells;
}

}  // namespace

metrics_report report_build(const prediction_set& preds, double threshold) {
  const auto per_label = per_label_auroc(preds);
  metrics_report r;
  r.dataset_tag = preds.dataset_tag;
  r.n_samples = preds.size();
  r.threshold = threshold;
  double acc = 0.0;
  for (std::size_t k = 0; k < per_label.size(); ++k) {
    r.per_label_auroc.emplace_back(preds.label_names[k], per_label[k]);
    if (per_label[k]) {
      acc += *per_label[k];
      ++r.labels_evaluated;
    } else {
      r.skipped_labels.push_back(preds.label_names[k]);
    }
  }
  if (r.labels_evaluated == 0) throw contract_error("macro AUROC: no label has both classes present");
  r.macro_auroc = acc / static_cast<double>(r.labels_evaluated);
  r.hamming_loss = hamming_loss(preds, threshold);
  const auto ranking = ranking_detail(preds);
  r.ranking_error = ranking.value;
  r.skipped_samples = ranking.skipped;
  return r;
}

std::string to_json_line(const metrics_report& r) {
  json per_label = json::array();
  for (const auto& [name, v] : r.per_label_auroc) {
    per_label.push_back({{"label", name}, {"auroc", v ? json(*v) : json(nullptr)}});
  }
  json j = {{"dataset_tag", r.dataset_tag},
            {"macro_auroc", r.macro_auroc},
            {"per_label_auroc", per_label},
            {"hamming_loss", r.hamming_loss},
            {"normalized_ranking_error", r.ranking_error},
            {"n_samples", r.n_samples},
            {"labels_evaluated", r.labels_evaluated},
            {"skipped_labels", r.skipped_labels},
            {"skipped_samples", r.skipped_samples},
            {"threshold", r.threshold}};
  return j.dump();
}

metrics_report parse_report_line(const std::string& line) {
  try {
    const auto j = json::parse(line);
    metrics_report r;
    r.dataset_tag = j.at("dataset_tag").get<std::string>();
    r.macro_auroc = j.at("macro_auroc").get<double>();
    for (const auto& e : j.at("per_label_auroc")) {
      const auto& v = e.at("auroc");
      r.per_label_auroc.emplace_back(e.at("label").get<std::string>(),
                                     v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    }
    r.hamming_loss = j.at("hamming_loss").get<double>();
    r.ranking_error = j.at("normalized_ranking_error").get<double>();
    r.n_samples = j.at("n_samples").get<std::size_t>();
    r.labels_evaluated = j.at("labels_evaluated").get<std::size_t>();
    r.skipped_labels = j.at("skipped_labels").get<std::vector<std::string>>();
    r.skipped_samples = j.at("skipped_samples").get<std::size_t>();
    r.threshold = j.at("threshold").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw schema_error(std::string("malformed metrics record: ") + e.what());
  }
}

std::string render_csv(const std::vector<report_row>& rows) {
  std::ostringstream os;
  for (const auto& line : table_cells(rows, 6)) {
    for (std::size_t i = 0; i < line.size(); ++i) os << (i ? "," : "") << csv_field(line[i]);
    os << '\n';
  }
  return os.str();
}

std::string render_text(const std::vector<report_row>& rows, int precision) {
  const auto cells = table_cells(rows, precision);
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& line : cells)
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  std::ostringstream os;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i) os << "  ";
      const auto& c = cells[r][i];
      // Names left-aligned, numbers right-aligned.
      if (i == 0) {
        os << c << std::string(width[i] - c.size(), ' ');
      } else {
        os << std::string(width[i] - c.size(), ' ') << c;
      }
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return os.str();
}

}  // namespace siamgrid::evalkit
