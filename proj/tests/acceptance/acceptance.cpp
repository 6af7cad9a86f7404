// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "golden.hpp"
#include "gradient_suite.hpp"
#include "op_checks.hpp"
#include "siamgrid/augment/kernels.hpp"
#include "siamgrid/augment/policy.hpp"
#include "siamgrid/cli/commands.hpp"
#include "siamgrid/cli/store.hpp"
#include "siamgrid/dataio/splits.hpp"
#include "siamgrid/dataio/synth.hpp"
#include "siamgrid/errors.hpp"
#include "siamgrid/evalkit/metrics.hpp"
#include "siamgrid/optim/sgd.hpp"
#include "siamgrid/protocols/protocols.hpp"

using namespace siamgrid;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double grad_rel_tolerance = 1e-3;
constexpr double grad_budget_seconds = 120.0;
constexpr std::uint64_t grad_seeds = 10;
constexpr double grad_op_eps = 1e-5;
constexpr double grad_model_eps = 3e-5;
constexpr double loss_tolerance = 1e-6;
constexpr double auroc_tolerance = 1e-9;
constexpr double prevalence_tolerance = 0.02;
constexpr double cosine_tolerance = 1e-12;
constexpr double trend_margin = 0.03;
constexpr double collapse_floor_factor = 0.5;

// Desk-scale trend experiment.
constexpr std::size_t trend_train = 6000;
constexpr std::size_t trend_eval = 1000;
constexpr std::size_t trend_image = 64;
constexpr std::size_t trend_labels = 4;
constexpr std::size_t trend_pretrain_epochs = 20;
constexpr std::size_t trend_probe_epochs = 15;
constexpr std::uint64_t trend_seeds = 3;
constexpr std::size_t trend_batch = 64;
constexpr double trend_lr = 0.2;  // applied rate 0.2 * 64 / 256 = 0.05
constexpr double trend_nuisance = 2.0;  // exposure and placement variation at twice the reference range

/// Collects failed checks of one criterion.
class verdict {
public:
  void check(bool ok, const std::string& what) {
    if (!ok && m_failures.size() < 5) m_failures.push_back(what);
    m_ok = m_ok && ok;
  }
  void note(const std::string& s) { m_notes += (m_notes.empty() ? "" : "; ") + s; }
  bool ok() const { return m_ok; }
  std::string detail() const {
    std::string out = m_notes;
    for (const auto& f : m_failures) out += (out.empty() ? "" : "; ") + std::string("failed: ") + f;
    return out;
  }

private:
  bool m_ok = true;
  std::vector<std::string> m_failures;
  std::string m_notes;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

using testing::f32::random_tensor;
using diffcore::real;
using diffcore::tensor;
using evalkit::label_na;
using evalkit::label_t;

// ---- 1 ------------------------------------------------------------------

verdict gradient_suite() {
  verdict v;
  const auto r = acceptance::run_gradient_suite(grad_seeds, grad_op_eps, grad_model_eps);
  v.note(std::to_string(r.checks) + " checks over " + std::to_string(grad_seeds) + " seeds in " + fmt(r.seconds, 3) +
         " s; worst op " + fmt(r.worst_op_error, 3) + " [" + r.worst_op + "], worst model " +
         fmt(r.worst_model_error, 3) + " [" + r.worst_parameter + "]");
  v.check(r.worst_op_error < grad_rel_tolerance, "op relative error");
  v.check(r.worst_model_error < grad_rel_tolerance, "model relative error");
  v.check(r.seconds < grad_budget_seconds, "runtime budget");
  return v;
}

// ---- 2 ------------------------------------------------------------------

tensor scaled_rows(const tensor& base, double factor) {
  std::vector<real> out(base.data().begin(), base.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= static_cast<real>(factor * (1.0 + 0.5 * double(i / base.dim(1))));
  return tensor(base.shape(), std::move(out), true);
}

tensor orthogonal_rows(const tensor& a, augment::seeded_rng& rng) {
  const auto n = a.dim(0), d = a.dim(1);
  std::vector<real> out(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<double> x(d);
    double dot = 0.0, aa = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = rng.uniform(-1, 1);
      dot += x[j] * a.at(r * d + j);
      aa += double(a.at(r * d + j)) * a.at(r * d + j);
    }
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = static_cast<real>(x[j] - dot / aa * a.at(r * d + j));
  }
  return tensor(a.shape(), std::move(out), true);
}

verdict loss_invariants() {
  verdict v;
  augment::seeded_rng rng(21);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto z = random_tensor({6, 16}, rng);
    const auto par = scaled_rows(z, 2.0), anti = scaled_rows(z, -3.0), orth = orthogonal_rows(z, rng);
    const double a = simsiam::simsiam_loss(par, par, z, z).item();
    const double b = simsiam::simsiam_loss(anti, anti, z, z).item();
    const double c = simsiam::simsiam_loss(orth, orth, z, z).item();
    worst = std::max({worst, std::abs(a + 1.0), std::abs(b - 1.0), std::abs(c)});
  }
  v.check(worst <= loss_tolerance, "parallel/orthogonal/anti-parallel values");

  double worst_swap = 0.0;
  bool bounded = true;
  for (int trial = 0; trial < 200; ++trial) {
    const auto p1 = random_tensor({5, 8}, rng), p2 = random_tensor({5, 8}, rng);
    const auto z1 = random_tensor({5, 8}, rng), z2 = random_tensor({5, 8}, rng);
    const double a = simsiam::simsiam_loss(p1, p2, z1, z2).item();
    const double b = simsiam::simsiam_loss(p2, p1, z2, z1).item();
    bounded = bounded && a >= -1.0 && a <= 1.0;
    worst_swap = std::max(worst_swap, std::abs(a - b));
  }
  v.check(bounded, "loss in [-1, 1]");
  v.check(worst_swap <= loss_tolerance, "branch-swap symmetry");

  bool zero_target_grad = true;
  for (int trial = 0; trial < 20; ++trial) {
    const auto p1 = random_tensor({4, 8}, rng), p2 = random_tensor({4, 8}, rng);
    auto z1 = random_tensor({4, 8}, rng), z2 = random_tensor({4, 8}, rng);
    diffcore::backward(simsiam::simsiam_loss(p1, p2, z1, z2));
    for (const auto* z : {&z1, &z2}) {
      if (!z->has_grad()) continue;
      for (real g : z->grad()) zero_target_grad = zero_target_grad && g == real(0);
    }
  }
  v.check(zero_target_grad, "gradient through stop-gradient targets");
  v.note("max |deviation| " + fmt(worst, 3) + ", max swap " + fmt(worst_swap, 3));
  return v;
}

// ---- 3 ------------------------------------------------------------------

evalkit::prediction_set random_predictions(std::size_t n, std::size_t k, std::uint64_t seed) {
  augment::seeded_rng rng(seed);
  evalkit::prediction_set p;
  for (std::size_t j = 0; j < k; ++j) p.label_names.push_back("l" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(k);
    std::vector<label_t> l(k);
    for (std::size_t j = 0; j < k; ++j) {
      s[j] = static_cast<double>(rng.index(21)) / 20.0;
      const double u = rng.uniform();
      l[j] = u < 0.1 ? label_na : (rng.uniform() < 0.4 ? 1 : 0);
    }
    p.scores.push_back(s);
    p.labels.push_back(l);
  }
  return p;
}

verdict metric_oracles() {
  verdict v;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = random_predictions(2 + seed * 2, 3, seed);
    const auto per = evalkit::per_label_auroc(p);
    for (std::size_t k = 0; k < 3; ++k) {
      double wins = 0.0;
      std::size_t pairs = 0;
      for (std::size_t a = 0; a < p.size(); ++a) {
        if (p.labels[a][k] != 1) continue;
        for (std::size_t b = 0; b < p.size(); ++b) {
          if (p.labels[b][k] != 0) continue;
          ++pairs;
          wins += p.scores[a][k] > p.scores[b][k] ? 1.0 : (p.scores[a][k] == p.scores[b][k] ? 0.5 : 0.0);
        }
      }
      v.check(per[k].has_value() == (pairs > 0), "AUROC definedness");
      if (pairs > 0 && per[k]) worst = std::max(worst, std::abs(*per[k] - wins / double(pairs)));
    }
  }
  v.check(worst <= auroc_tolerance, "AUROC vs pair counting");

  bool hamming_exact = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto p = random_predictions(1 + seed % 50, 1 + seed % 8, seed + 1000);
    std::size_t wrong = 0, cells = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < p.num_labels(); ++j) {
        if (p.labels[i][j] == label_na) continue;
        ++cells;
        wrong += (p.scores[i][j] >= 0.5 ? 1 : 0) != p.labels[i][j];
      }
    const double direct = cells ? double(wrong) / double(cells) : 0.0;
    hamming_exact = hamming_exact && evalkit::hamming_loss(p, 0.5) == direct;
  }
  v.check(hamming_exact, "Hamming vs direct formula");

  bool ranking_exact = true;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto p = random_predictions(1 + seed % 50, 2 + seed % 7, seed + 5000);
    double total = 0.0;
    std::size_t samples = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::size_t bad = 0, pairs = 0;
      for (std::size_t a = 0; a < p.num_labels(); ++a)
        for (std::size_t b = 0; b < p.num_labels(); ++b) {
          if (p.labels[i][a] != 1 || p.labels[i][b] != 0) continue;
          ++pairs;
          bad += p.scores[i][a] <= p.scores[i][b];
        }
      if (pairs == 0) continue;
      total += double(bad) / double(pairs);
      ++samples;
    }
    if (samples == 0) continue;
    ranking_exact = ranking_exact && evalkit::ranking_error(p) == total / double(samples);
  }
  v.check(ranking_exact, "ranking error vs pair enumeration");
  v.note("max AUROC deviation " + fmt(worst, 3));
  return v;
}

// ---- 4 ------------------------------------------------------------------

verdict split_properties() {
  verdict v;
  augment::seeded_rng rng(31);
  std::vector<std::vector<label_t>> labels(3000, std::vector<label_t>(4));
  for (auto& row : labels)
    for (auto& l : row) l = rng.uniform() < 0.3 ? 1 : 0;
  const auto splits = dataio::stratified_indices(labels, dataio::default_fractions, 5);
  v.check(splits.size() == dataio::default_fractions.size(), "one split per fraction");
  std::vector<std::size_t> prev;
  double worst = 0.0;
  for (const auto& [fraction, members] : splits) {
    v.check(members.size() == static_cast<std::size_t>(std::llround(3000 * fraction / 100.0)), "split size");
    v.check(std::includes(members.begin(), members.end(), prev.begin(), prev.end()), "nesting");
    prev = members;
    std::vector<std::vector<label_t>> sub;
    for (auto i : members) sub.push_back(labels[i]);
    for (std::size_t k = 0; k < 4; ++k) {
      std::size_t positives = 0;
      for (const auto& row : sub) positives += row[k] == 1;
      if (positives >= 50) worst = std::max(worst, std::abs(dataio::prevalence(sub, k) - dataio::prevalence(labels, k)));
    }
  }
  v.check(worst <= prevalence_tolerance, "prevalence within 2 pp");

  // 600 majority-only, 100 mixed, 300 others; target 30%.
  std::vector<std::vector<label_t>> skewed;
  for (int i = 0; i < 600; ++i) skewed.push_back({1, 0});
  for (int i = 0; i < 100; ++i) skewed.push_back({1, 1});
  for (int i = 0; i < 300; ++i) skewed.push_back({0, 1});
  const double target = 0.3;
  const auto keep = dataio::balance_undersample(skewed, 0, target, 9);
  std::vector<std::vector<label_t>> kept;
  for (auto i : keep) kept.push_back(skewed[i]);
  const std::size_t dropped = skewed.size() - keep.size();
  // Count of majority positives that hits the target exactly in real arithmetic.
  const double exact = (700.0 - target * 1000.0) / (1.0 - target);
  v.check(dataio::prevalence(kept, 0) <= target, "target reached");
  v.check(std::abs(static_cast<double>(dropped) - exact) <= 1.0, "within one sample of the target");
  v.note("max prevalence shift " + fmt(worst, 3) + ", undersample dropped " + std::to_string(dropped) + " (exact " +
         fmt(exact, 6) + ")");
  return v;
}

// ---- 5 ------------------------------------------------------------------

augment::image ramp(std::size_t h, std::size_t w) {
  augment::image img(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) img.at(y, x) = static_cast<float>((y * w + x) % 97) / 96.0f;
  return img;
}

verdict augmentation_fidelity() {
  using namespace augment;
  verdict v;
  for (auto kind : all_kinds) {
    const auto expected = testing::read_raw_image(testing::golden_path(kind));
    v.check(testing::golden_output(kind) == expected, std::string("golden ") + std::string(to_string(kind)));
  }

  constexpr int draws = 1000;
  seeded_rng rng(41);
  bool crop_ok = true, cutout_ok = true, noise_ok = true, blur_ok = true;
  for (int i = 0; i < draws; ++i) {
    const auto s = sample_crop(64, 64, {0.2, 1.0}, {0.75, 4.0 / 3.0}, rng);
    if (!s.fallback) crop_ok = crop_ok && s.target_scale >= 0.2 && s.target_scale <= 1.0;
    const double area = double(s.region.height * s.region.width) / (64.0 * 64.0);
    crop_ok = crop_ok && area > 0.0 && area <= 1.0;

    draw_trace ct;
    cutout(ramp(32, 32), {0.02, 0.33}, {0.3, 3.3}, rng, &ct);
    if (!ct.get("skipped")) {
      const double f = *ct.get("area_fraction");
      cutout_ok = cutout_ok && f >= 0.02 && f <= 0.33;
    }
    draw_trace nt;
    gaussian_noise(image(2, 2, 0.5f), {0.01, 0.03}, rng, &nt);
    noise_ok = noise_ok && *nt.get("sigma") >= 0.01 && *nt.get("sigma") <= 0.03;
    draw_trace bt;
    gaussian_blur(image(12, 12, 0.1f), 23, {0.1, 2.0}, rng, &bt);
    blur_ok = blur_ok && *bt.get("sigma") >= 0.1 && *bt.get("sigma") <= 2.0;
  }
  v.check(crop_ok, "crop scale range");
  v.check(cutout_ok, "cutout area range");
  v.check(noise_ok, "noise sigma range");
  v.check(blur_ok, "blur sigma range");

  const auto img = ramp(16, 16);
  seeded_rng r(42);
  v.check(apply_pipeline(img, pipeline(5, default_spec(aug_kind::identity)), r) == img, "identity composition");
  auto full_crop = default_spec(aug_kind::crop_resize);
  full_crop.scale = {1, 1};
  full_crop.ratio = {1, 1};
  v.check(apply_pipeline(img, {full_crop, default_spec(aug_kind::identity)}, r) == img, "full crop then identity");
  const auto [x1, x2] = make_views(img, single_branch_compose(default_spec(aug_kind::identity),
                                                              default_spec(aug_kind::identity)), 7, 3);
  v.check(x1 == img && x2 == img, "identity views");
  v.note("8 golden kernels, " + std::to_string(draws) + " draws per range check");
  return v;
}

// ---- 6 ------------------------------------------------------------------

verdict cosine_schedule() {
  verdict v;
  double worst = 0.0;
  for (double base : {0.05, 30.0, 1e-5}) {
    for (double min : {0.0, base / 10.0}) {
      for (std::size_t total : {1u, 20u, 200u}) {
        const optim::cosine_schedule s{base, min, total};
        const double T = static_cast<double>(total);
        for (double t : {0.0, T / 4, T / 2, 3 * T / 4, T}) {
          const double expected = min + 0.5 * (base - min) * (1.0 + std::cos(std::numbers::pi * t / T));
          worst = std::max(worst, std::abs(optim::cosine_lr(s, t) - expected));
        }
        double prev = optim::cosine_lr(s, 0.0);
        for (int i = 1; i <= 1000; ++i) {
          const double lr = optim::cosine_lr(s, T * i / 1000.0);
          v.check(lr <= prev, "monotone non-increasing");
          prev = lr;
        }
      }
    }
  }
  v.check(worst <= cosine_tolerance, "closed form at quarter points");
  v.note("max deviation " + fmt(worst, 3));
  return v;
}

// ---- 7 and 9 --------------------------------------------------------------

struct trend_run {
  std::string policy;
  std::uint64_t seed = 0;
  double macro_auroc = 0.0;
  double final_collapse = 0.0;
  double seconds = 0.0;
};

augment::view_policy trend_policy(const std::string& name) {
  using augment::aug_kind;
  using augment::default_spec;
  if (name == "identity") return augment::single_branch_compose(default_spec(aug_kind::identity), default_spec(aug_kind::identity));
  if (name == "blur+identity") return augment::single_branch_compose(default_spec(aug_kind::blur), default_spec(aug_kind::identity));
  return augment::single_branch_compose(default_spec(aug_kind::crop_resize), default_spec(aug_kind::distort));
}

const std::vector<std::string> trend_policies{"identity", "blur+identity", "crop_resize+distort"};

std::vector<trend_run> run_trend(std::size_t threads) {
  dataio::synthetic_config sc;
  sc.n_samples = trend_train;
  sc.image_size = trend_image;
  sc.K = trend_labels;
  sc.prevalences.assign(trend_labels, 0.3);
  sc.nuisance = trend_nuisance;
  const auto train = dataio::synth_generate(sc);
  auto ec = sc;
  ec.n_samples = trend_eval;
  ec.first_index = trend_train;
  const auto eval = dataio::synth_generate(ec);

  std::vector<trend_run> jobs;
  for (std::uint64_t seed = 0; seed < trend_seeds; ++seed)
    for (const auto& p : trend_policies) jobs.push_back({p, seed});

  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next == jobs.size()) return;
        i = next++;
      }
      auto& job = jobs[i];
      const auto start = std::chrono::steady_clock::now();
      protocols::pretrain_config pc;
      pc.policy = trend_policy(job.policy);
      pc.optim = {trend_lr, 1e-4, 0.9, trend_batch, trend_pretrain_epochs};
      pc.seed = job.seed;
      auto pre = protocols::pretrain(pc, train);
      protocols::probe_config prc;
      prc.optim.epochs = trend_probe_epochs;
      prc.seed = job.seed;
      const auto probe = protocols::linear_probe(*pre.model, train, {{"eval", &eval}}, prc);
      job.macro_auroc = probe.record.reports.at("eval").macro_auroc;
      job.final_collapse = pre.record.epochs.back().collapse_metric;
      job.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::lock_guard lock(mu);
      std::cerr << "  trend " << job.policy << " seed " << job.seed << ": macro AUROC " << fmt(job.macro_auroc)
                << ", final collapse " << fmt(job.final_collapse) << " (" << fmt(job.seconds, 3) << " s)\n";
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, jobs.size()); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return jobs;
}

verdict trend_ordering(const std::vector<trend_run>& runs, double seconds) {
  verdict v;
  std::map<std::string, double> mean;
  for (const auto& r : runs) mean[r.policy] += r.macro_auroc / double(trend_seeds);
  const double crop = mean.at("crop_resize+distort");
  v.check(crop >= mean.at("identity") + trend_margin, "crop+distort exceeds identity by the margin");
  v.check(crop >= mean.at("blur+identity"), "crop+distort at least blur+identity");
  for (const auto& p : trend_policies) v.note(p + " " + fmt(mean.at(p)));
  v.note("wall " + fmt(seconds / 60.0, 3) + " min on " + std::to_string(std::max(1u, std::thread::hardware_concurrency())) +
         " cores");
  return v;
}

verdict non_collapse(const std::vector<trend_run>& runs) {
  verdict v;
  const double floor = collapse_floor_factor / std::sqrt(double(simsiam::model_config{}.proj_dim));
  for (const auto& r : runs) {
    if (r.policy != "crop_resize+distort") continue;
    v.check(r.final_collapse > floor, "seed " + std::to_string(r.seed));
    v.note("seed " + std::to_string(r.seed) + " " + fmt(r.final_collapse));
  }
  v.note("floor " + fmt(floor));
  return v;
}

// ---- 8 ------------------------------------------------------------------

dataio::dataset small_data(std::size_t n, std::uint64_t first) {
  dataio::synthetic_config c;
  c.n_samples = n;
  c.image_size = 16;
  c.first_index = first;
  c.difficulty = 0.8;
  c.seed = 3;
  return dataio::synth_generate(c);
}

std::vector<std::vector<float>> snapshot(const simsiam::simsiam_model& m) {
  std::vector<std::vector<float>> out;
  for (const auto& p : m.registry().parameters()) out.emplace_back(p.value.data().begin(), p.value.data().end());
  for (const auto& p : m.registry().buffers()) out.emplace_back(p.value.data().begin(), p.value.data().end());
  return out;
}

verdict protocol_contracts() {
  using namespace protocols;
  verdict v;
  const auto a_train = small_data(96, 0), a_eval = small_data(64, 1000);
  pretrain_config pc;
  pc.model = testing::f32::tiny_model_config();
  pc.policy = augment::single_branch_compose(augment::default_spec(augment::aug_kind::crop_resize),
                                             augment::default_spec(augment::aug_kind::distort));
  pc.optim = {0.05, 1e-4, 0.9, 32, 2};
  pc.seed = 1;
  probe_config prc;
  prc.optim = {30.0, 0.0, 0.9, 32, 5};

  auto pre = pretrain(pc, a_train);
  const auto before = snapshot(*pre.model);
  auto probe = linear_probe(*pre.model, a_train, {{"a", &a_eval}}, prc);
  v.check(snapshot(*pre.model) == before, "probe leaves the encoder bit-identical");

  finetune_config zero;
  zero.optim = {1e-5, 1e-4, 0.9, 32, 0};
  const auto rec = fine_tune(*pre.model, probe.head, a_train, {{"a", &a_eval}}, zero);
  v.check(rec.reports.at("a") == probe.record.reports.at("a"), "0-epoch fine-tune reproduces the probe");

  // Forgetting chain through the run store: pretrain A, probe A, fine-tune B, zero-shot A.
  const auto root = fs::temp_directory_path() / "siamgrid_acceptance_chain";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream ini(root / "a.ini");
    ini << "[data]\nimage_size = 16\nn_train = 96\nn_eval = 64\nseed = 3\ndifficulty = 0.8\n"
           "[model]\nstem_width = 4\nstage_widths = 4,8\nblocks_per_stage = 1,1\nfeature_dim = 8\nproj_dim = 16\n"
           "[policy]\nt1 = crop_resize\nt2 = distort\n"
           "[optim]\npretrain_epochs = 2\npretrain_batch = 32\nprobe_epochs = 5\nprobe_batch = 32\n"
           "finetune_epochs = 1\nfinetune_batch = 32\n";
    std::ofstream b(root / "b.ini");
    b << "include = a.ini\n[data]\nseed = 9\nshift_prevalences = 0.4,0.4,0.2,0.2\nshift_noise = 0.02\n";
    std::ofstream back(root / "back.ini");
    back << "include = a.ini\n[protocol]\nlabel_map = nodule:nodule,ring:ring,stripes:stripes,haze:haze\n";
  }
  const auto store = (root / "runs").string();
  auto cli = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "siamgrid");
    args.insert(args.end(), {"--store", store});
    std::ostringstream out, err;
    const int code = cli::run_cli(args, out, err);
    std::string last;
    std::istringstream lines(out.str());
    for (std::string line; std::getline(lines, line);)
      if (!line.empty()) last = line;
    if (code != cli::exit_ok) std::cerr << err.str();
    return std::pair{code, last.substr(last.rfind(' ') + 1)};
  };
  const auto a_ini = (root / "a.ini").string();
  const auto [c1, pre_dir] = cli({"pretrain", "--config", a_ini});
  const auto [c2, probe_dir] = cli({"probe", "--config", a_ini, "--encoder", pre_dir});
  const auto [c3, ft_dir] = cli({"finetune", "--config", (root / "b.ini").string(), "--encoder", pre_dir, "--head", probe_dir});
  const auto [c4, back_dir] = cli({"eval", "--config", (root / "back.ini").string(), "--encoder", ft_dir, "--head", ft_dir});
  v.check(c1 == 0 && c2 == 0 && c3 == 0 && c4 == 0, "chain exit codes");
  if (c1 == 0 && c2 == 0 && c3 == 0 && c4 == 0) {
    const auto records = cli::run_store(store).records();
    v.check(records.size() == 4, "four indexed runs");
    if (records.size() == 4) {
      const auto enc = cli::directory_fingerprint(fs::path(pre_dir) / "encoder");
      v.check(records[1].parents.at("encoder") == enc, "probe links the pretrained encoder");
      v.check(records[2].parents.at("encoder") == enc, "fine-tune links the pretrained encoder");
      v.check(records[2].parents.at("head") == cli::directory_fingerprint(fs::path(probe_dir) / "head"),
              "fine-tune links the probe head");
      v.check(records[3].parents.at("encoder") == cli::directory_fingerprint(fs::path(ft_dir) / "encoder"),
              "zero-shot links the fine-tuned encoder");
      bool finite = true;
      for (const auto& r : records)
        for (const auto& [name, rep] : r.reports)
          finite = finite && std::isfinite(rep.macro_auroc) && std::isfinite(rep.hamming_loss) &&
                   std::isfinite(rep.ranking_error);
      v.check(finite, "finite metrics");
      v.check(records[3].label == "zero_shot", "zero-shot record");
      v.note("zero-shot A macro AUROC " + fmt(records[3].reports.at("eval").macro_auroc));
    }
  }
  fs::remove_all(root);
  return v;
}

// ---- 10 -----------------------------------------------------------------

verdict fixture_rendering() {
  verdict v;
  const auto fixture = testing::fixture_dir() / "pairwise_table.csv";
  std::ostringstream out, err;
  const int code = cli::run_cli({"siamgrid", "report", "--fixture", fixture.string()}, out, err);
  v.check(code == cli::exit_ok, "report exit code");
  v.check(out.str().find("t_theta: crop_resize+distort") != std::string::npos, "report names crop_resize+distort");
  const auto rows = cli::read_sweep_table(fixture);
  const auto& best = protocols::select_t_theta(rows);
  v.check(best.aug1 == augment::aug_kind::crop_resize && best.aug2 == augment::aug_kind::distort,
          "select_t_theta on the fixture");
  v.note(std::to_string(rows.size()) + " rows; selected " + best.name() + " at " + fmt(best.report.macro_auroc, 3));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--only", only, "Run only these criteria (1-10), e.g. --only 1,2")->delimiter(',');
  app.add_option("--threads", threads, "Parallel pretraining runs for criteria 7 and 9");
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  bool all_ok = true;
  auto report = [&](int id, const std::string& title, const std::function<verdict()>& body) {
    if (!wanted(id)) return;
    verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    all_ok = all_ok && v.ok();
    std::cout << (v.ok() ? "PASS" : "FAIL") << " criterion " << id << " (" << title << "): " << v.detail()
              << std::endl;
  };

  report(1, "gradient suite", gradient_suite);
  report(2, "loss invariants", loss_invariants);
  report(3, "metric oracles", metric_oracles);
  report(4, "split properties", split_properties);
  report(5, "augmentation determinism and fidelity", augmentation_fidelity);
  report(6, "cosine schedule", cosine_schedule);

  std::vector<trend_run> runs;
  double trend_seconds = 0.0;
  if (wanted(7) || wanted(9)) {
    const auto start = std::chrono::steady_clock::now();
    try {
      runs = run_trend(threads);
    } catch (const std::exception& e) {
      std::cerr << "trend experiment failed: " << e.what() << '\n';
    }
    trend_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  auto need_runs = [&](const std::function<verdict()>& body) {
    return [&, body] {
      if (runs.size() != trend_policies.size() * trend_seeds) {
        verdict v;
        v.check(false, "trend experiment did not complete");
        return v;
      }
      return body();
    };
  };
  report(7, "desk-scale augmentation trend", need_runs([&] { return trend_ordering(runs, trend_seconds); }));
  report(8, "protocol contracts", protocol_contracts);
  report(9, "non-collapse", need_runs([&] { return non_collapse(runs); }));
  report(10, "fixture rendering", fixture_rendering);
  return all_ok ? 0 : 1;
}
