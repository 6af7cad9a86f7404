#include "siamgrid/dataio/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "siamgrid/augment/rng.hpp"
#include "siamgrid/errors.hpp"

namespace siamgrid::dataio {

namespace {

constexpr std::array<std::string_view, synth_pattern_count> k_pattern_names = {
    "nodule", "ring", "stripes", "haze", "spots", "cardiomegaly", "line", "effusion"};

// Amplitude of every pattern at difficulty 1.
constexpr double k_base_amplitude = 0.5;

double smoothstep(double edge0, double edge1, double x) {
  const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Soft inside-indicator of an axis-aligned ellipse; `soft` is the edge width in normalized radius.
double ellipse_mask(double u, double v, double cu, double cv, double ru, double rv, double soft) {
  const double d = std::sqrt(((u - cu) / ru) * ((u - cu) / ru) + ((v - cv) / rv) * ((v - cv) / rv));
  return 1.0 - smoothstep(1.0 - soft, 1.0 + soft, d);
}

struct geometry {
  double dx = 0.0, dy = 0.0, scale = 1.0;
  double left_u() const { return 0.31 + dx; }
  double right_u() const { return 0.69 + dx; }
  double mid_v() const { return 0.5 + dy; }
  double ru() const { return 0.16 * scale; }
  double rv() const { return 0.31 * scale; }
  double lungs(double u, double v) const {
    return std::max(ellipse_mask(u, v, left_u(), mid_v(), ru(), rv(), 0.15),
                    ellipse_mask(u, v, right_u(), mid_v(), ru(), rv(), 0.15));
  }
};

// Per-sample pattern parameters, drawn once so rendering is a pure function.
struct pattern_draws {
  double jitter_u = 0.0, jitter_v = 0.0;
  double angle = 0.0, phase = 0.0;
  std::array<double, 6> spot_u{}, spot_v{};
  double line_u0 = 0.0, line_u1 = 0.0;
};

pattern_draws draw_pattern(augment::seeded_rng& rng, const geometry& g) {
  pattern_draws d;
  d.jitter_u = rng.uniform(-0.03, 0.03);
  d.jitter_v = rng.uniform(-0.03, 0.03);
  d.angle = rng.uniform(0.6, 1.0);
  d.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < d.spot_u.size(); ++i) {
    const bool left = rng.coin();
    const double cu = left ? g.left_u() : g.right_u();
    d.spot_u[i] = cu + rng.uniform(-0.6, 0.6) * g.ru();
    d.spot_v[i] = g.mid_v() + rng.uniform(-0.6, 0.6) * g.rv();
  }
  d.line_u0 = rng.uniform(0.42, 0.58);
  d.line_u1 = rng.uniform(0.55, 0.75);
  return d;
}

// Value of pattern k at (u, v), before amplitude scaling; roughly in [0, 1].
double pattern_value(std::size_t k, double u, double v, const geometry& g, const pattern_draws& d, double px) {
  switch (k) {
    case 0: {  // compact blob in the upper left lung
      const double cu = g.left_u() + d.jitter_u, cv = g.mid_v() - 0.14 + d.jitter_v;
      const double r2 = (u - cu) * (u - cu) + (v - cv) * (v - cv);
      return std::exp(-r2 / (2.0 * 0.045 * 0.045));
    }
    case 1: {  // ring in the lower right lung
      const double cu = g.right_u() + d.jitter_u, cv = g.mid_v() + 0.12 + d.jitter_v;
      const double r = std::sqrt((u - cu) * (u - cu) + (v - cv) * (v - cv));
      const double t = (r - 0.065) / std::max(0.018, px);
      return std::exp(-0.5 * t * t);
    }
    case 2: {  // oriented stripes across both lung fields
      const double c = std::cos(d.angle), s = std::sin(d.angle);
      const double w = 2.0 * std::numbers::pi / 0.11;
      return g.lungs(u, v) * 0.5 * (1.0 + std::cos(w * (c * u + s * v) + d.phase));
    }
    case 3:  // diffuse haze over both lung fields
      return g.lungs(u, v) * 0.6;
    case 4: {  // scattered small spots
      double acc = 0.0;
      const double sigma = std::max(0.018, 0.8 * px);
      for (std::size_t i = 0; i < d.spot_u.size(); ++i) {
        const double r2 = (u - d.spot_u[i]) * (u - d.spot_u[i]) + (v - d.spot_v[i]) * (v - d.spot_v[i]);
        acc += std::exp(-r2 / (2.0 * sigma * sigma));
      }
      return std::min(1.0, acc);
    }
    case 5:  // enlarged heart shadow between the lungs
      return ellipse_mask(u, v, 0.5 + g.dx + 0.03, g.mid_v() + 0.14, 0.14 * g.scale, 0.15 * g.scale, 0.2) * 0.8;
    case 6: {  // thin tube-like line
      const double v0 = 0.05, v1 = g.mid_v() + 0.2;
      if (v < v0 || v > v1) return 0.0;
      const double t = (v - v0) / (v1 - v0);
      const double cu = d.line_u0 + (d.line_u1 - d.line_u0) * t * t;
      const double dist = (u - cu) / std::max(0.012, 0.7 * px);
      return std::exp(-0.5 * dist * dist);
    }
    case 7:  // blunted base of the right lung
      return ellipse_mask(u, v, g.right_u(), g.mid_v(), g.ru(), g.rv(), 0.15) *
             smoothstep(g.mid_v() + 0.12, g.mid_v() + 0.2, v) * 0.7;
    default:
      return 0.0;
  }
}

std::vector<label_t> draw_labels(const synthetic_config& config, std::uint64_t index) {
  augment::seeded_rng rng(augment::derive_seed(config.seed, {index, 0}));
  std::vector<label_t> labels(config.K);
  for (std::size_t k = 0; k < config.K; ++k) labels[k] = rng.uniform() < config.prevalences[k] ? 1 : 0;
  return labels;
}

augment::image render(const synthetic_config& config, std::uint64_t index, const std::vector<label_t>& labels) {
  augment::seeded_rng rng(augment::derive_seed(config.seed, {index, 1}));
  const std::size_t n = config.image_size;
  geometry g;
  const double s = config.nuisance;
  g.dx = 0.05 * s * rng.uniform(-1.0, 1.0);
  g.dy = 0.05 * s * rng.uniform(-1.0, 1.0);
  g.scale = 1.0 + 0.1 * s * rng.uniform(-1.0, 1.0);
  const double background = rng.uniform(0.05, 0.15);
  const double lung_level = rng.uniform(0.4, 0.6);
  const double gain = std::max(0.2, 1.0 + 0.25 * s * rng.uniform(-1.0, 1.0));
  const double offset = 0.08 * s * rng.uniform(-1.0, 1.0);
  const double tilt_u = 0.1 * s * rng.uniform(-1.0, 1.0);
  const double tilt_v = 0.1 * s * rng.uniform(-1.0, 1.0);
  const double noise = rng.uniform(0.01, 0.03) + config.extra_noise;
  std::array<pattern_draws, synth_pattern_count> draws{};
  for (std::size_t k = 0; k < config.K; ++k) draws[k] = draw_pattern(rng, g);

  const double amplitude = k_base_amplitude * config.difficulty;
  const double px = 1.0 / static_cast<double>(n);
  augment::image img(n, n);
  for (std::size_t y = 0; y < n; ++y) {
    const double v = (static_cast<double>(y) + 0.5) * px;
    for (std::size_t x = 0; x < n; ++x) {
      const double u = (static_cast<double>(x) + 0.5) * px;
      double value = background + (lung_level - background) * g.lungs(u, v);
      for (std::size_t k = 0; k < config.K; ++k) {
        if (labels[k] == 1) value += amplitude * pattern_value(k, u, v, g, draws[k], px);
      }
      value = value * gain + offset + tilt_u * (u - 0.5) + tilt_v * (v - 0.5);
      img.at(y, x) = static_cast<float>(std::clamp(value, 0.0, 1.0));
    }
  }
  for (auto& p : img.pixels) p = std::clamp(static_cast<float>(p + noise * rng.normal()), 0.0f, 1.0f);
  return img;
}

}  // namespace

std::string_view synth_pattern_name(std::size_t k) {
  if (k >= synth_pattern_count) throw contract_error("synthetic pattern index out of range");
  return k_pattern_names[k];
}

void validate(const synthetic_config& config) {
  if (config.K < 1 || config.K > synth_pattern_count) {
    throw contract_error("synthetic config: K = " + std::to_string(config.K) + " exceeds the " +
                         std::to_string(synth_pattern_count) + " available patterns");
  }
  if (config.prevalences.size() != config.K) throw contract_error("synthetic config: need one prevalence per label");
  for (double p : config.prevalences) {
    if (!(p > 0.0 && p < 1.0)) throw contract_error("synthetic config: prevalences must lie in (0, 1)");
  }
  if (config.image_size < 8) throw contract_error("synthetic config: image_size must be >= 8");
  if (!(config.difficulty > 0.0 && config.difficulty <= 1.0)) {
    throw contract_error("synthetic config: difficulty must lie in (0, 1]");
  }
  if (!(config.nuisance >= 0.0 && config.nuisance <= 4.0)) {
    throw contract_error("synthetic config: nuisance must lie in [0, 4]");
  }
  if (!(config.extra_noise >= 0.0)) throw contract_error("synthetic config: extra_noise must be >= 0");
}

std::vector<std::vector<label_t>> synth_labels(const synthetic_config& config) {
  validate(config);
  std::vector<std::vector<label_t>> out;
  out.reserve(config.n_samples);
  for (std::size_t i = 0; i < config.n_samples; ++i) out.push_back(draw_labels(config, config.first_index + i));
  return out;
}

dataset synth_generate(const synthetic_config& config) {
  validate(config);
  dataset ds;
  for (std::size_t k = 0; k < config.K; ++k) ds.label_names.emplace_back(k_pattern_names[k]);
  ds.items.reserve(config.n_samples);
  for (std::size_t i = 0; i < config.n_samples; ++i) {
    const std::uint64_t index = config.first_index + i;
    auto labels = draw_labels(config, index);
    auto img = render(config, index, labels);
    char id[32];
    std::snprintf(id, sizeof id, "s%06llu", static_cast<unsigned long long>(index));
    ds.items.push_back(labeled_image{id, std::move(img), std::move(labels), config.dataset_tag});
  }
  return ds;
}

synthetic_config shifted(const synthetic_config& base, const std::vector<double>& prevalences, double extra_noise) {
  synthetic_config out = base;
  out.prevalences = prevalences;
  out.extra_noise = extra_noise;
  out.dataset_tag = base.dataset_tag + "-shifted";
  out.seed = augment::derive_seed(base.seed, {0x5348494654ull});
  return out;
}

}  // namespace siamgrid::dataio
