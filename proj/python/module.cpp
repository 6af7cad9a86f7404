#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "siamgrid/augment/policy.hpp"
#include "siamgrid/cli/commands.hpp"
#include "siamgrid/cli/config.hpp"
#include "siamgrid/dataio/splits.hpp"
#include "siamgrid/dataio/synth.hpp"
#include "siamgrid/errors.hpp"
#include "siamgrid/evalkit/metrics.hpp"
#include "siamgrid/evalkit/report.hpp"
#include "siamgrid/optim/sgd.hpp"
#include "siamgrid/protocols/protocols.hpp"
#include "siamgrid/simsiam/model.hpp"

namespace py = pybind11;
using namespace siamgrid;
using evalkit::label_t;

namespace {

using float_array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using double_array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using label_array = py::array_t<std::int8_t, py::array::c_style | py::array::forcecast>;

augment::image to_image(const float_array& a) {
  if (a.ndim() != 2) throw dimension_error("expected a 2-D image array");
  augment::image img(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
  return img;
}

float_array from_image(const augment::image& img) {
  float_array out({img.height, img.width});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

evalkit::prediction_set to_predictions(const double_array& scores, const label_array& labels) {
  if (scores.ndim() != 2 || labels.ndim() != 2 || scores.shape(0) != labels.shape(0) ||
      scores.shape(1) != labels.shape(1)) {
    throw dimension_error("scores and labels must be N x K arrays of the same shape");
  }
  const auto n = static_cast<std::size_t>(scores.shape(0)), k = static_cast<std::size_t>(scores.shape(1));
  evalkit::prediction_set p;
  for (std::size_t j = 0; j < k; ++j) p.label_names.push_back("label" + std::to_string(j));
  p.scores.assign(n, std::vector<double>(k));
  p.labels.assign(n, std::vector<label_t>(k));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      p.scores[i][j] = scores.at(i, j);
      p.labels[i][j] = labels.at(i, j);
    }
  return p;
}

simsiam::tensor to_tensor(const float_array& a) {
  if (a.ndim() != 2) throw dimension_error("expected an N x D array");
  std::vector<diffcore::real> v(a.data(), a.data() + a.size());
  return simsiam::tensor({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))}, std::move(v));
}

py::dict report_dict(const evalkit::metrics_report& r) {
  py::dict d;
  d["macro_auroc"] = r.macro_auroc;
  d["hamming_loss"] = r.hamming_loss;
  d["ranking_error"] = r.ranking_error;
  d["per_label_auroc"] = r.per_label_auroc;
  d["n_samples"] = r.n_samples;
  d["skipped_labels"] = r.skipped_labels;
  return d;
}

}  // namespace

PYBIND11_MODULE(_siamgrid, m) {
  m.doc() = "Bindings to the siamgrid C++ core";
  py::register_exception<error>(m, "SiamgridError", PyExc_RuntimeError);

  m.def("version", &cli::version_tag);

  m.def("augmentation_kinds", [] {
    std::vector<std::string> out;
    for (auto k : augment::all_kinds) out.emplace_back(augment::to_string(k));
    return out;
  });
  m.def(
      "augment",
      [](const float_array& image, const std::string& spec, std::uint64_t seed) {
        augment::seeded_rng rng(seed);
        return from_image(augment::apply_pipeline(to_image(image), augment::parse_pipeline(spec), rng));
      },
      py::arg("image"), py::arg("spec"), py::arg("seed") = 0,
      "Applies a pipeline such as 'crop_resize(scale=0.2:1),distort' to an H x W float image in [0, 1].");
  m.def(
      "make_views",
      [](const float_array& image, const std::string& t1, const std::string& t2, std::uint64_t seed,
         std::uint64_t index) {
        const auto policy = augment::single_branch_compose(augment::parse_spec(t1), augment::parse_spec(t2));
        const auto [a, b] = augment::make_views(to_image(image), policy, seed, index);
        return py::make_tuple(from_image(a), from_image(b));
      },
      py::arg("image"), py::arg("t1"), py::arg("t2"), py::arg("seed") = 0, py::arg("index") = 0,
      "Two views of one image: t2 after t1 on one branch, identity on the other.");

  m.def(
      "synth_generate",
      [](std::size_t n, std::size_t image_size, std::size_t labels, std::uint64_t seed, double difficulty,
         double nuisance, std::uint64_t first_index) {
        dataio::synthetic_config c;
        c.n_samples = n;
        c.image_size = image_size;
        c.K = labels;
        c.prevalences.assign(labels, 0.3);
        c.seed = seed;
        c.difficulty = difficulty;
        c.nuisance = nuisance;
        c.first_index = first_index;
        const auto ds = dataio::synth_generate(c);
        float_array images({n, image_size, image_size});
        label_array y({n, labels});
        auto* px = images.mutable_data();
        for (std::size_t i = 0; i < n; ++i) {
          std::copy(ds.items[i].image.pixels.begin(), ds.items[i].image.pixels.end(), px + i * image_size * image_size);
          for (std::size_t k = 0; k < labels; ++k) y.mutable_at(i, k) = ds.items[i].labels[k];
        }
        py::dict d;
        d["images"] = images;
        d["labels"] = y;
        d["ids"] = ds.ids();
        d["label_names"] = ds.label_names;
        return d;
      },
      py::arg("n"), py::arg("image_size") = 64, py::arg("labels") = 4, py::arg("seed") = 0,
      py::arg("difficulty") = 0.5, py::arg("nuisance") = 1.0, py::arg("first_index") = 0);

  m.def(
      "stratified_indices",
      [](const label_array& labels, const std::vector<double>& fractions, std::uint64_t seed) {
        if (labels.ndim() != 2) throw dimension_error("labels must be an N x K array");
        std::vector<std::vector<label_t>> rows(labels.shape(0), std::vector<label_t>(labels.shape(1)));
        for (py::ssize_t i = 0; i < labels.shape(0); ++i)
          for (py::ssize_t k = 0; k < labels.shape(1); ++k) rows[i][k] = labels.at(i, k);
        return dataio::stratified_indices(rows, fractions, seed);
      },
      py::arg("labels"), py::arg("fractions") = dataio::default_fractions, py::arg("seed") = 0);

  m.def("macro_auroc", [](const double_array& s, const label_array& l) { return evalkit::macro_auroc(to_predictions(s, l)); },
        py::arg("scores"), py::arg("labels"));
  m.def("per_label_auroc",
        [](const double_array& s, const label_array& l) { return evalkit::per_label_auroc(to_predictions(s, l)); },
        py::arg("scores"), py::arg("labels"));
  m.def(
      "hamming_loss",
      [](const double_array& s, const label_array& l, double t) { return evalkit::hamming_loss(to_predictions(s, l), t); },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
  m.def("ranking_error",
        [](const double_array& s, const label_array& l) { return evalkit::ranking_error(to_predictions(s, l)); },
        py::arg("scores"), py::arg("labels"));
  m.def(
      "metrics_report",
      [](const double_array& s, const label_array& l, double t) {
        return report_dict(evalkit::report_build(to_predictions(s, l), t));
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);

  m.def(
      "cosine_lr",
      [](double base, double min, std::size_t total, double t) { return optim::cosine_lr({base, min, total}, t); },
      py::arg("base_lr"), py::arg("min_lr"), py::arg("total_epochs"), py::arg("t"));

  m.def(
      "simsiam_loss",
      [](const float_array& p1, const float_array& p2, const float_array& z1, const float_array& z2) {
        diffcore::no_grad_guard guard;
        return simsiam::simsiam_loss(to_tensor(p1), to_tensor(p2), to_tensor(z1), to_tensor(z2)).item();
      },
      py::arg("p1"), py::arg("p2"), py::arg("z1"), py::arg("z2"));
  m.def("collapse_metric", [](const float_array& z) { return simsiam::collapse_metric(to_tensor(z)); }, py::arg("z"));

  m.def(
      "read_sweep_table",
      [](const std::filesystem::path& path) {
        py::list out;
        for (const auto& r : cli::read_sweep_table(path)) {
          py::dict d;
          d["aug1"] = std::string(augment::to_string(r.aug1));
          d["aug2"] = std::string(augment::to_string(r.aug2));
          d["failed"] = r.error.has_value();
          d["macro_auroc"] = r.report.macro_auroc;
          d["hamming_loss"] = r.report.hamming_loss;
          d["ranking_error"] = r.report.ranking_error;
          out.append(d);
        }
        return out;
      },
      py::arg("path"));
  m.def(
      "select_t_theta",
      [](const std::filesystem::path& path) { return protocols::select_t_theta(cli::read_sweep_table(path)).name(); },
      py::arg("path"), "Best pair of a pairwise results table, e.g. 'crop_resize+distort'.");

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "siamgrid");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one command-line invocation in-process; returns (exit_code, stdout, stderr).");
}
