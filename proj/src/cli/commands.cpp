#include "siamgrid/cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <boost/tokenizer.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "siamgrid/cli/config.hpp"
#include "siamgrid/cli/store.hpp"
#include "siamgrid/dataio/manifest.hpp"
#include "siamgrid/dataio/png_io.hpp"
#include "siamgrid/dataio/splits.hpp"
#include "siamgrid/dataio/synth.hpp"
#include "siamgrid/errors.hpp"

namespace siamgrid::cli {

namespace fs = std::filesystem;

namespace {

struct flags {
  std::vector<std::string> configs;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::string store;
  std::string encoder;
  std::string head;
  std::string out;
  std::string fixture;
  std::string svg;
  std::vector<std::string> phases;
  std::vector<std::string> runs;
};

struct context {
  config_document doc;
  run_settings settings;
};

context prepare(const flags& f, const std::string& phase) {
  std::vector<fs::path> files(f.configs.begin(), f.configs.end());
  context ctx{load_config(files), {}};
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    const auto dot = s.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw config_error("--set expects section.key=value, got '" + s + "'");
    }
    apply_override(ctx.doc, s.substr(0, dot), s.substr(dot + 1, eq - dot - 1), s.substr(eq + 1));
  }
  if (f.seed) apply_override(ctx.doc, "protocol", "seed", std::to_string(*f.seed));
  apply_override(ctx.doc, "protocol", "phase", phase);
  ctx.settings = resolve(ctx.doc);
  return ctx;
}

dataio::dataset subset(const dataio::dataset& ds, const std::vector<std::size_t>& indices) {
  dataio::dataset out;
  out.label_names = ds.label_names;
  out.items.reserve(indices.size());
  for (auto i : indices) out.items.push_back(ds.items.at(i));
  return out;
}

struct data_bundle {
  dataio::dataset train;
  std::optional<dataio::dataset> validation;
  dataio::dataset eval;
};

data_bundle load_data(const run_settings& s) {
  const auto& d = s.data;
  data_bundle b;
  if (d.source == "synthetic") {
    auto cfg = d.synthetic;
    cfg.n_samples = d.n_train;
    cfg.first_index = 0;
    b.train = dataio::synth_generate(cfg);
    if (d.n_validation > 0) {
      cfg.n_samples = d.n_validation;
      cfg.first_index = d.n_train;
      b.validation = dataio::synth_generate(cfg);
    }
    cfg.n_samples = d.n_eval;
    cfg.first_index = d.n_train + d.n_validation;
    if (!d.shift_prevalences.empty() || d.shift_noise > 0.0) {
      cfg = dataio::shifted(cfg, d.shift_prevalences.empty() ? cfg.prevalences : d.shift_prevalences, d.shift_noise);
    }
    b.eval = dataio::synth_generate(cfg);
  } else {
    const auto all = dataio::load_dataset(d.manifest, d.image_size, d.manifest.stem().string());
    if (!d.train_ids.empty() || !d.eval_ids.empty()) {
      if (d.train_ids.empty() || d.eval_ids.empty()) {
        throw config_error("data.train_ids and data.eval_ids must be given together");
      }
      b.train = all.select(dataio::read_id_file(d.train_ids));
      b.eval = all.select(dataio::read_id_file(d.eval_ids));
      if (!d.validation_ids.empty()) b.validation = all.select(dataio::read_id_file(d.validation_ids));
    } else {
      if (d.n_train + d.n_validation + d.n_eval > all.size()) {
        throw config_error("data.n_train + data.n_validation + data.n_eval exceeds the " +
                           std::to_string(all.size()) + " manifest rows");
      }
      const auto parts =
          dataio::stratified_partition(all.label_matrix(), {d.n_train, d.n_validation, d.n_eval}, s.split_seed);
      b.train = subset(all, parts[0]);
      if (d.n_validation > 0) b.validation = subset(all, parts[1]);
      b.eval = subset(all, parts[2]);
    }
  }
  if (d.fraction < 100.0) {
    const auto splits = dataio::stratified_indices(b.train.label_matrix(), {d.fraction}, s.split_seed);
    b.train = subset(b.train, splits.at(d.fraction));
  }
  return b;
}

protocols::eval_sets evals_of(const data_bundle& b) {
  protocols::eval_sets sets{{"eval", &b.eval}};
  if (b.validation) sets.emplace_back("validation", &*b.validation);
  return sets;
}

fs::path encoder_dir(const std::string& flag) {
  if (flag.empty()) throw dependency_error("--encoder CKPT is required");
  const fs::path p(flag);
  if (fs::exists(p / "model.json")) return p;
  if (fs::exists(p / "encoder" / "model.json")) return p / "encoder";
  throw dependency_error("no encoder checkpoint at " + p.string());
}

fs::path head_dir(const std::string& flag) {
  if (flag.empty()) throw dependency_error("--head CKPT is required");
  const fs::path p(flag);
  if (fs::exists(p / "head.json")) return p;
  if (fs::exists(p / "head" / "head.json")) return p / "head";
  throw dependency_error("no head checkpoint at " + p.string());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out.flush()) throw io_error("cannot write " + path.string());
}

void print_epochs(std::ostream& out, const protocols::run_record& r) {
  for (const auto& e : r.epochs) {
    out << "epoch " << e.epoch << " loss " << e.loss << " collapse " << e.collapse_metric << " lr " << e.lr << '\n';
  }
}

void print_reports(std::ostream& out, const protocols::run_record& r) {
  for (const auto& [name, rep] : r.reports) {
    out << name << ": macro_auroc " << rep.macro_auroc << " hamming_loss " << rep.hamming_loss
        << " ranking_error " << rep.ranking_error << '\n';
  }
}

/**
 * Shared run lifecycle: fingerprint, skip when already indexed, fresh run
 * directory holding the resolved config, body, record, index append.
 */
template <class Body>
int run_phase(const context& ctx, const flags& f, const std::string& phase,
              const std::map<std::string, std::string>& parents, std::ostream& out, Body&& body) {
  run_store store(default_store_root(f.store));
  const auto fp = fingerprint(ctx.doc, parents);
  const auto dir = store.run_dir(phase, fp);
  if (!f.force) {
    if (auto existing = store.find(fp)) {
      out << "up to date: " << dir.string() << '\n';
      return exit_ok;
    }
  }
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_text(dir / "config.ini", render(ctx.doc));
  protocols::run_record record = body(dir);
  record.phase = phase;
  record.fingerprint = fp;
  record.parents = parents;
  write_text(dir / "record.json", protocols::to_json_line(record) + "\n");
  store.append(record);
  print_epochs(out, record);
  print_reports(out, record);
  out << phase << ' ' << fp.substr(0, 12) << ' ' << dir.string() << '\n';
  return exit_ok;
}

protocols::pretrain_config pretrain_config_of(const run_settings& s) {
  protocols::pretrain_config pc;
  pc.model = s.model;
  pc.policy = s.policy;
  pc.optim = s.pretrain;
  pc.seed = s.seed;
  return pc;
}

protocols::probe_config probe_config_of(const run_settings& s) {
  return protocols::probe_config{s.probe, s.seed, s.threshold};
}

protocols::finetune_config finetune_config_of(const run_settings& s, const protocols::optim_settings& optim) {
  return protocols::finetune_config{optim, s.seed, s.threshold};
}

int cmd_synth(const flags& f, std::ostream& out) {
  const auto ctx = prepare(f, "synth");
  const auto& d = ctx.settings.data;
  if (d.source != "synthetic") throw config_error("synth requires data.source = synthetic");
  if (f.out.empty()) throw config_error("synth requires --out DIR");
  const fs::path root(f.out);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  if (ec) throw io_error("cannot create " + (root / "images").string() + ": " + ec.message());

  auto cfg = d.synthetic;
  cfg.n_samples = d.n_train + d.n_validation + d.n_eval;
  const auto ds = dataio::synth_generate(cfg);
  dataio::manifest m;
  m.label_names = ds.label_names;
  for (const auto& item : ds.items) {
    const auto rel = "images/" + item.id + ".png";
    dataio::write_png(root / rel, item.image, 16);
    dataio::manifest_record r;
    r.id = item.id;
    r.path = rel;
    r.rescale_slope = 1.0 / 65535.0;
    r.labels = item.labels;
    m.records.push_back(std::move(r));
  }
  dataio::write_manifest(root / "manifest.csv", m);
  const auto ids = ds.ids();
  const auto a = ids.begin();
  const auto t = static_cast<std::ptrdiff_t>(d.n_train);
  const auto v = static_cast<std::ptrdiff_t>(d.n_validation);
  dataio::write_id_file(root / "train.ids", {a, a + t});
  if (v > 0) dataio::write_id_file(root / "validation.ids", {a + t, a + t + v});
  dataio::write_id_file(root / "eval.ids", {a + t + v, ids.end()});
  out << "wrote " << ds.size() << " images to " << root.string() << '\n';
  return exit_ok;
}

int cmd_pretrain(const flags& f, std::ostream& out) {
  const auto ctx = prepare(f, "pretrain");
  return run_phase(ctx, f, "pretrain", {}, out, [&](const fs::path& dir) {
    const auto data = load_data(ctx.settings);
    auto result = protocols::pretrain(pretrain_config_of(ctx.settings), data.train);
    protocols::save_model(dir / "encoder", *result.model);
    result.record.checkpoints = {"encoder"};
    return result.record;
  });
}

int cmd_probe(const flags& f, std::ostream& out) {
  const auto ctx = prepare(f, "probe");
  const auto enc = encoder_dir(f.encoder);
  return run_phase(ctx, f, "probe", {{"encoder", directory_fingerprint(enc)}}, out, [&](const fs::path& dir) {
    const auto data = load_data(ctx.settings);
    auto model = protocols::load_model(enc);
    auto result = protocols::linear_probe(*model, data.train, evals_of(data), probe_config_of(ctx.settings));
    protocols::save_head(dir / "head", result.head);
    result.record.checkpoints = {"head"};
    return result.record;
  });
}

int cmd_finetune(const flags& f, std::ostream& out) {
  const auto ctx = prepare(f, "finetune");
  const auto enc = encoder_dir(f.encoder);
  const auto hd = head_dir(f.head);
  const std::map<std::string, std::string> parents{{"encoder", directory_fingerprint(enc)},
                                                   {"head", directory_fingerprint(hd)}};
  return run_phase(ctx, f, "finetune", parents, out, [&](const fs::path& dir) {
    const auto data = load_data(ctx.settings);
    auto model = protocols::load_model(enc);
    auto head = protocols::load_head(hd);
    auto record = protocols::fine_tune(*model, head, data.train, evals_of(data),
                                       finetune_config_of(ctx.settings, ctx.settings.finetune));
    protocols::save_model(dir / "encoder", *model);
    protocols::save_head(dir / "head", head);
    record.checkpoints = {"encoder", "head"};
    return record;
  });
}

int cmd_supervised(const flags& f, std::ostream& out) {
  const auto ctx = prepare(f, "supervised");
  const auto& s = ctx.settings;
  fs::path enc;
  std::map<std::string, std::string> parents;
  if (s.init == protocols::init_kind::checkpoint) {
    enc = encoder_dir(f.encoder);
    parents["encoder"] = directory_fingerprint(enc);
  }
  return run_phase(ctx, f, "supervised", parents, out, [&](const fs::path& dir) {
    const auto data = load_data(s);
    auto result = protocols::supervised_baseline(s.model, s.init, enc, data.train, evals_of(data),
                                                 finetune_config_of(s, s.supervised));
    protocols::save_model(dir / "encoder", *result.model);
    protocols::save_head(dir / "head", result.head);
    result.record.checkpoints = {"encoder", "head"};
    return result.record;
  });
}

int cmd_eval(const flags& f, std::ostream& out) {
  const auto ctx = prepare(f, "eval");
  const auto enc = encoder_dir(f.encoder);
  const auto hd = head_dir(f.head);
  const std::map<std::string, std::string> parents{{"encoder", directory_fingerprint(enc)},
                                                   {"head", directory_fingerprint(hd)}};
  return run_phase(ctx, f, "eval", parents, out, [&](const fs::path&) {
    const auto data = load_data(ctx.settings);
    auto model = protocols::load_model(enc);
    const auto head = protocols::load_head(hd);
    protocols::run_record record;
    if (ctx.settings.label_map.empty()) {
      record.label = "eval";
      record.reports["eval"] = protocols::evaluate(*model, head, data.eval, ctx.settings.threshold);
    } else {
      record.label = "zero_shot";
      auto z = protocols::zero_shot_eval(*model, head, data.eval, ctx.settings.label_map, ctx.settings.threshold);
      for (const auto& name : z.unmapped_labels) out << "unmapped label: " << name << '\n';
      record.reports["eval"] = std::move(z.report);
    }
    return record;
  });
}

std::vector<evalkit::report_row> sweep_report_rows(const std::vector<protocols::sweep_row>& rows) {
  std::vector<evalkit::report_row> out;
  for (const auto& r : rows) {
    if (!r.error) out.push_back({r.name(), r.report});
  }
  return out;
}

int cmd_sweep(const flags& f, std::ostream& out) {
  const auto ctx = prepare(f, "sweep");
  return run_phase(ctx, f, "sweep", {}, out, [&](const fs::path& dir) {
    const auto data = load_data(ctx.settings);
    const dataio::dataset* validation = data.validation ? &*data.validation : &data.eval;
    if (!data.validation) out << "no validation split configured; selecting on the eval split\n";
    protocols::sweep_config sc{pretrain_config_of(ctx.settings), probe_config_of(ctx.settings), ctx.settings.threads};
    const auto rows = protocols::sweep_pairwise(ctx.settings.pool, sc, data.train, *validation);
    protocols::run_record record;
    record.label = "sweep";
    for (const auto& r : rows) {
      if (r.error) {
        out << "cell " << r.name() << " failed: " << *r.error << '\n';
        continue;
      }
      record.reports[r.name()] = r.report;
      record.collapsed = record.collapsed || r.collapsed;
    }
    const auto table = sweep_report_rows(rows);
    const auto csv = render_sweep_csv(rows);
    write_text(dir / "sweep.csv", csv);
    write_text(dir / "sweep_labels.csv", evalkit::render_csv(table));
    if (!f.out.empty()) write_text(f.out, csv);
    out << evalkit::render_text(table);
    out << "t_theta: " << protocols::select_t_theta(rows).name() << '\n';
    return record;
  });
}

std::string fraction_label(double fraction) {
  std::ostringstream os;
  os << fraction << '%';
  return os.str();
}

int cmd_efficiency(const flags& f, std::ostream& out) {
  const auto ctx = prepare(f, "efficiency");
  const auto enc = encoder_dir(f.encoder);
  const auto hd = head_dir(f.head);
  const std::map<std::string, std::string> parents{{"encoder", directory_fingerprint(enc)},
                                                   {"head", directory_fingerprint(hd)}};
  return run_phase(ctx, f, "efficiency", parents, out, [&](const fs::path& dir) {
    const auto data = load_data(ctx.settings);
    const auto points =
        protocols::data_efficiency(enc, hd, data.train, ctx.settings.fractions, evals_of(data),
                                   finetune_config_of(ctx.settings, ctx.settings.finetune), ctx.settings.split_seed);
    protocols::run_record record;
    record.label = "efficiency";
    std::vector<evalkit::report_row> table;
    for (const auto& p : points) {
      for (const auto& [set, rep] : p.reports) {
        const auto key = fraction_label(p.fraction) + "/" + set;
        record.reports[key] = rep;
        table.push_back({key, rep});
      }
    }
    const auto csv = evalkit::render_csv(table);
    write_text(dir / "efficiency.csv", csv);
    if (!f.out.empty()) write_text(f.out, csv);
    return record;
  });
}

std::vector<evalkit::report_row> rows_of(const protocols::run_record& r) {
  std::vector<evalkit::report_row> rows;
  if (r.phase == "sweep") {
    std::vector<protocols::sweep_row> sweep;
    for (const auto& [name, rep] : r.reports) {
      const auto plus = name.find('+');
      const auto a = augment::kind_from_string(name.substr(0, plus));
      const auto b = augment::kind_from_string(name.substr(plus + 1));
      if (plus == std::string::npos || !a || !b) throw schema_error("unrecognised sweep row name '" + name + "'");
      protocols::sweep_row row;
      row.aug1 = *a;
      row.aug2 = *b;
      row.report = rep;
      sweep.push_back(std::move(row));
    }
    std::stable_sort(sweep.begin(), sweep.end(), protocols::sweep_order);
    return sweep_report_rows(sweep);
  }
  const std::string base = r.label.empty() ? r.phase : r.label;
  for (const auto& [key, rep] : r.reports) rows.push_back({r.reports.size() > 1 ? base + "[" + key + "]" : base, rep});
  return rows;
}

int cmd_report(const flags& f, std::ostream& out) {
  std::vector<evalkit::report_row> rows;
  if (!f.fixture.empty()) {
    auto sweep = read_sweep_table(f.fixture);
    std::stable_sort(sweep.begin(), sweep.end(), protocols::sweep_order);
    rows = sweep_report_rows(sweep);
    out << evalkit::render_text(rows);
    out << "t_theta: " << protocols::select_t_theta(sweep).name() << '\n';
  } else {
    const run_store store(default_store_root(f.store));
    for (const auto& r : store.records()) {
      if (!f.phases.empty() && std::find(f.phases.begin(), f.phases.end(), r.phase) == f.phases.end()) continue;
      if (!f.runs.empty() && std::none_of(f.runs.begin(), f.runs.end(), [&](const std::string& p) {
            return r.fingerprint.compare(0, p.size(), p) == 0;
          })) {
        continue;
      }
      for (auto& row : rows_of(r)) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw contract_error("report: no runs match the selection");
    out << evalkit::render_text(rows);
  }
  if (!f.out.empty()) write_text(f.out, evalkit::render_csv(rows));
  if (!f.svg.empty()) write_text(f.svg, render_svg(rows));
  return exit_ok;
}

int exit_code_of(error_kind kind) {
  switch (kind) {
    case error_kind::config: return exit_config;
    case error_kind::dependency: return exit_dependency;
    default: return exit_runtime;
  }
}

void report_error(std::ostream& err, int code, const std::string& kind, const std::string& message) {
  err << "siamgrid: " << kind << " error: " << message << '\n';
  nlohmann::json rec{{"error", {{"code", code}, {"kind", kind}, {"message", message}}}};
  err << rec.dump() << '\n';
}

}  // namespace

std::vector<protocols::sweep_row> read_sweep_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read " + path.string());
  using tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  std::string line;
  std::getline(in, line);
  if (line.rfind("aug1,aug2,macro_auroc,hamming_loss,ranking_error", 0) != 0) {
    throw schema_error(path.string() + ": expected header aug1,aug2,macro_auroc,hamming_loss,ranking_error");
  }
  std::vector<protocols::sweep_row> rows;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const tokenizer tok(line);
    const std::vector<std::string> cells(tok.begin(), tok.end());
    if (cells.size() != 5) throw row_error(n, "expected 5 cells");
    const auto a = augment::kind_from_string(cells[0]);
    const auto b = augment::kind_from_string(cells[1]);
    if (!a || !b) throw row_error(n, "unknown augmentation");
    protocols::sweep_row row;
    row.aug1 = *a;
    row.aug2 = *b;
    if (cells[2] == "NA") {
      row.error = "failed";
      rows.push_back(std::move(row));
      continue;
    }
    try {
      row.report.macro_auroc = std::stod(cells[2]);
      row.report.hamming_loss = std::stod(cells[3]);
      row.report.ranking_error = std::stod(cells[4]);
    } catch (const std::exception&) {
      throw row_error(n, "non-numeric metric");
    }
    row.report.dataset_tag = path.stem().string();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string render_sweep_csv(const std::vector<protocols::sweep_row>& rows) {
  std::ostringstream os;
  os << std::setprecision(6) << "aug1,aug2,macro_auroc,hamming_loss,ranking_error\n";
  for (const auto& r : rows) {
    os << augment::to_string(r.aug1) << ',' << augment::to_string(r.aug2) << ',';
    if (r.error) {
      os << "NA,NA,NA\n";
    } else {
      os << r.report.macro_auroc << ',' << r.report.hamming_loss << ',' << r.report.ranking_error << '\n';
    }
  }
  return os.str();
}

std::string render_svg(const std::vector<evalkit::report_row>& rows) {
  constexpr int bar_h = 18, gap = 4, left = 200, plot_w = 400, top = 10;
  const int height = top * 2 + static_cast<int>(rows.size()) * (bar_h + gap);
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + plot_w + 60 << "\" height=\"" << height
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double v = std::clamp(rows[i].report.macro_auroc, 0.0, 1.0);
    const int y = top + static_cast<int>(i) * (bar_h + gap);
    os << "<text x=\"" << left - 6 << "\" y=\"" << y + 13 << "\" text-anchor=\"end\">" << rows[i].name << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << y << "\" width=\"" << v * plot_w << "\" height=\"" << bar_h
       << "\" fill=\"#4a78a8\"/>\n";
    os << "<text x=\"" << left + v * plot_w + 4 << "\" y=\"" << y + 13 << "\">" << v << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised augmentation experiments on chest radiograph data", "siamgrid"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_tag());
  flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.configs, "Config file; repeatable, later files override earlier ones");
    sub->add_option("--set", f.sets, "Override one key, e.g. optim.pretrain_epochs=5; repeatable");
    sub->add_option("--seed", f.seed, "Override protocol.seed");
    sub->add_option("--store", f.store, "Run store directory (default $SIAMGRID_STORE or ./runs)");
    sub->add_option("--out", f.out, "Output path");
  };
  auto training = [&](CLI::App* sub) {
    common(sub);
    sub->add_flag("--force", f.force, "Re-run even when the fingerprint is already indexed");
  };
  auto checkpoints = [&](CLI::App* sub, bool with_head) {
    sub->add_option("--encoder", f.encoder, "Encoder checkpoint or run directory");
    if (with_head) sub->add_option("--head", f.head, "Head checkpoint or run directory");
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset as PNGs, manifest and id files");
  common(synth);
  auto* pretrain = app.add_subcommand("pretrain", "SimSiam pretraining");
  training(pretrain);
  auto* probe = app.add_subcommand("probe", "Linear probe on a frozen encoder");
  training(probe);
  checkpoints(probe, false);
  auto* finetune = app.add_subcommand("finetune", "Fine-tune encoder and head");
  training(finetune);
  checkpoints(finetune, true);
  auto* supervised = app.add_subcommand("supervised", "Fully supervised baseline");
  training(supervised);
  checkpoints(supervised, false);
  auto* eval = app.add_subcommand("eval", "Evaluate an encoder and head, optionally through protocol.label_map");
  training(eval);
  checkpoints(eval, true);
  auto* sweep = app.add_subcommand("sweep", "Pairwise augmentation sweep over policy.pool");
  training(sweep);
  auto* efficiency = app.add_subcommand("efficiency", "Fine-tune on nested fractions of the training set");
  training(efficiency);
  checkpoints(efficiency, true);
  auto* report = app.add_subcommand("report", "Render tables from the run store or a results fixture");
  report->add_option("--store", f.store, "Run store directory");
  report->add_option("--phase", f.phases, "Only runs of this phase; repeatable");
  report->add_option("--run", f.runs, "Only runs whose fingerprint starts with this prefix; repeatable");
  report->add_option("--fixture", f.fixture, "Render a pairwise results table instead of the store");
  report->add_option("--out", f.out, "CSV output path");
  report->add_option("--svg", f.svg, "SVG bar chart output path");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForVersion&) {
    out << version_tag() << '\n';
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    report_error(err, exit_config, "usage", e.what());
    return exit_config;
  }

  try {
    if (synth->parsed()) return cmd_synth(f, out);
    if (pretrain->parsed()) return cmd_pretrain(f, out);
    if (probe->parsed()) return cmd_probe(f, out);
    if (finetune->parsed()) return cmd_finetune(f, out);
    if (supervised->parsed()) return cmd_supervised(f, out);
    if (eval->parsed()) return cmd_eval(f, out);
    if (sweep->parsed()) return cmd_sweep(f, out);
    if (efficiency->parsed()) return cmd_efficiency(f, out);
    return cmd_report(f, out);
  } catch (const error& e) {
    const int code = exit_code_of(e.kind());
    report_error(err, code, to_string(e.kind()), e.what());
    return code;
  } catch (const std::exception& e) {
    report_error(err, exit_runtime, "runtime", e.what());
    return exit_runtime;
  }
}

}  // namespace siamgrid::cli
