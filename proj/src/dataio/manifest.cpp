#include "siamgrid/dataio/manifest.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <optional>
#include <unordered_map>

#include <boost/tokenizer.hpp>

#include "siamgrid/dataio/preprocess.hpp"
#include "siamgrid/errors.hpp"

namespace siamgrid::dataio {

namespace {

using csv_tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

std::vector<std::string> split_csv(const std::string& line, std::size_t row) {
  try {
    csv_tokenizer tok(line);
    return {tok.begin(), tok.end()};
  } catch (const boost::escaped_list_error& e) {
    throw row_error(row, std::string("malformed CSV: ") + e.what());
  }
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\\") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& cell, std::size_t row, const char* column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  const auto res = std::from_chars(first, last, v);
  if (cell.empty() || res.ec != std::errc{} || res.ptr != last) {
    throw row_error(row, std::string("cannot parse ") + column + " value '" + cell + "'");
  }
  return v;
}

}  // namespace

std::string to_string(photometric p) { return p == photometric::monochrome1 ? "MONOCHROME1" : "MONOCHROME2"; }

label_t parse_label(const std::string& cell) {
  if (cell == "1") return 1;
  if (cell == "0") return 0;
  if (cell == "NA" || cell.empty()) return label_na;
  throw contract_error("invalid label cell '" + cell + "'");
}

std::string format_label(label_t value) {
  if (value == 1) return "1";
  if (value == 0) return "0";
  return "NA";
}

manifest load_manifest(const std::filesystem::path& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw schema_error("manifest " + path.string() + " has no header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line, 0);

  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!column_of.emplace(header[i], i).second) throw schema_error("duplicate manifest column '" + header[i] + "'");
  }
  std::array<std::size_t, 7> req{};
  for (std::size_t r = 0; r < req.size(); ++r) {
    const auto it = column_of.find(manifest_required_columns[r]);
    if (it == column_of.end()) {
      throw schema_error(std::string("manifest is missing required column '") + manifest_required_columns[r] + "'");
    }
    req[r] = it->second;
  }
  manifest m;
  std::vector<std::size_t> label_cols, meta_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    bool required = false;
    for (auto r : req) required = required || r == i;
    if (required) continue;
    if (header[i].rfind("meta.", 0) == 0) {
      meta_cols.push_back(i);
      m.metadata_columns.push_back(header[i]);
    } else {
      label_cols.push_back(i);
      m.label_names.push_back(header[i]);
    }
  }

  const auto base = path.parent_path();
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv(line, row);
    if (cells.size() != header.size()) {
      throw row_error(row, "expected " + std::to_string(header.size()) + " cells, found " +
                               std::to_string(cells.size()));
    }
    manifest_record rec;
    rec.id = cells[req[0]];
    rec.path = cells[req[1]];
    if (rec.id.empty()) throw row_error(row, "empty id");
    const auto& photo = cells[req[2]];
    if (photo == "MONOCHROME1") {
      rec.photometric_interpretation = photometric::monochrome1;
    } else if (photo == "MONOCHROME2") {
      rec.photometric_interpretation = photometric::monochrome2;
    } else {
      throw row_error(row, "unknown photometric interpretation '" + photo + "'");
    }
    rec.window_center = parse_double(cells[req[3]], row, "window_center");
    rec.window_width = parse_double(cells[req[4]], row, "window_width");
    rec.rescale_slope = parse_double(cells[req[5]], row, "rescale_slope");
    rec.rescale_intercept = parse_double(cells[req[6]], row, "rescale_intercept");
    if (!(rec.window_width > 0.0)) throw row_error(row, "window_width must be positive");
    for (std::size_t c : label_cols) {
      try {
        rec.labels.push_back(parse_label(cells[c]));
      } catch (const contract_error&) {
        throw row_error(row, "unparsable label '" + cells[c] + "' in column '" + header[c] + "'");
      }
    }
    for (std::size_t c : meta_cols) rec.metadata.push_back(cells[c]);
    if (check_paths) {
      const auto image_path = std::filesystem::path(rec.path).is_absolute() ? std::filesystem::path(rec.path)
                                                                            : base / rec.path;
      if (!std::filesystem::exists(image_path)) throw row_error(row, "image path does not exist: " + image_path.string());
    }
    m.records.push_back(std::move(rec));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const manifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write manifest " + path.string());
  std::string line;
  for (const char* c : manifest_required_columns) line += (line.empty() ? "" : ",") + std::string(c);
  for (const auto& n : m.label_names) line += "," + csv_field(n);
  for (const auto& n : m.metadata_columns) line += "," + csv_field(n);
  out << line << '\n';
  for (const auto& r : m.records) {
    if (r.labels.size() != m.label_names.size() || r.metadata.size() != m.metadata_columns.size()) {
      throw contract_error("manifest record '" + r.id + "' does not match the column set");
    }
    line = csv_field(r.id) + "," + csv_field(r.path) + "," + to_string(r.photometric_interpretation) + "," +
           number(r.window_center) + "," + number(r.window_width) + "," + number(r.rescale_slope) + "," +
           number(r.rescale_intercept);
    for (label_t v : r.labels) line += "," + format_label(v);
    for (const auto& v : r.metadata) line += "," + csv_field(v);
    out << line << '\n';
  }
  if (!out) throw io_error("failed writing manifest " + path.string());
}

std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path, const manifest_record& r) {
  const std::filesystem::path p(r.path);
  return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

dataset load_dataset(const std::filesystem::path& manifest_path, std::size_t out_size, const std::string& dataset_tag) {
  const auto m = load_manifest(manifest_path);
  dataset ds;
  ds.label_names = m.label_names;
  ds.items.reserve(m.records.size());
  for (const auto& rec : m.records) {
    const auto raw = read_png_raw(resolve_image_path(manifest_path, rec));
    ds.items.push_back(labeled_image{rec.id, preprocess_raw(raw, rec, out_size), rec.labels, dataset_tag});
  }
  return ds;
}

}  // namespace siamgrid::dataio
