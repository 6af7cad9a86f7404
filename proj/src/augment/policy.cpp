#include "siamgrid/augment/policy.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <numeric>

#include "siamgrid/errors.hpp"

namespace siamgrid::augment {

namespace {

constexpr std::array<std::string_view, 8> k_kind_names = {"identity", "crop_resize", "rotate", "cutout",
                                                          "distort",  "noise",       "blur",   "sobel"};

std::string number(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view text, std::string_view context) {
  text = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw config_error("augmentation spec: cannot parse number '" + std::string(text) + "' in " +
                       std::string(context));
  }
  return v;
}

range parse_range(std::string_view text, std::string_view context) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    const double v = parse_number(text, context);
    return {v, v};
  }
  return {parse_number(text.substr(0, colon), context), parse_number(text.substr(colon + 1), context)};
}

std::string range_text(range r) { return number(r.lo) + ":" + number(r.hi); }

void require(bool ok, const aug_spec& spec, const char* what) {
  if (!ok) throw contract_error(std::string(to_string(spec.kind)) + ": " + what);
}

// Splits on commas at parenthesis depth zero.
std::vector<std::string_view> split_top_level(std::string_view text) {
  std::vector<std::string_view> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '(') ++depth;
    if (text[i] == ')') {
      if (--depth < 0) throw config_error("augmentation pipeline: unbalanced ')' in '" + std::string(text) + "'");
    }
    if (text[i] == ',' && depth == 0) {
      parts.push_back(trim(text.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (depth != 0) throw config_error("augmentation pipeline: unbalanced '(' in '" + std::string(text) + "'");
  parts.push_back(trim(text.substr(start)));
  return parts;
}

}  // namespace

std::string_view to_string(aug_kind kind) { return k_kind_names[static_cast<std::size_t>(kind)]; }

std::optional<aug_kind> kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < k_kind_names.size(); ++i) {
    if (k_kind_names[i] == name) return static_cast<aug_kind>(i);
  }
  return std::nullopt;
}

aug_spec default_spec(aug_kind kind) {
  aug_spec s;
  s.kind = kind;
  switch (kind) {
    case aug_kind::cutout:
      s.scale = {0.02, 0.33};
      s.ratio = {0.3, 3.3};
      break;
    case aug_kind::blur:
      s.sigma = {0.1, 2.0};
      break;
    default:
      break;
  }
  return s;
}

void validate(const aug_spec& spec) {
  switch (spec.kind) {
    case aug_kind::identity:
    case aug_kind::sobel:
      break;
    case aug_kind::crop_resize:
      require(spec.scale.lo > 0.0 && spec.scale.lo <= spec.scale.hi && spec.scale.hi <= 1.0, spec,
              "scale must satisfy 0 < lo <= hi <= 1");
      require(spec.ratio.lo > 0.0 && spec.ratio.lo <= spec.ratio.hi, spec, "ratio must satisfy 0 < lo <= hi");
      break;
    case aug_kind::rotate:
      require(spec.degrees >= 0.0 && spec.degrees <= 180.0, spec, "degrees must lie in [0, 180]");
      break;
    case aug_kind::cutout:
      require(spec.scale.lo > 0.0 && spec.scale.lo <= spec.scale.hi && spec.scale.hi < 1.0, spec,
              "scale must satisfy 0 < lo <= hi < 1");
      require(spec.ratio.lo > 0.0 && spec.ratio.lo <= spec.ratio.hi, spec, "ratio must satisfy 0 < lo <= hi");
      break;
    case aug_kind::distort:
      require(spec.lambda >= 0.0 && spec.lambda <= 1.0, spec, "lambda must lie in [0, 1]");
      break;
    case aug_kind::noise:
      require(spec.sigma.lo >= 0.0 && spec.sigma.lo <= spec.sigma.hi, spec, "sigma must satisfy 0 <= lo <= hi");
      break;
    case aug_kind::blur:
      require(spec.kernel >= 1 && spec.kernel % 2 == 1, spec, "kernel must be odd and positive");
      require(spec.sigma.lo > 0.0 && spec.sigma.lo <= spec.sigma.hi, spec, "sigma must satisfy 0 < lo <= hi");
      break;
  }
}

std::string format(const aug_spec& spec) {
  std::string out(to_string(spec.kind));
  std::vector<std::string> params;
  switch (spec.kind) {
    case aug_kind::crop_resize:
      params.push_back("scale=" + range_text(spec.scale));
      params.push_back("ratio=" + range_text(spec.ratio));
      if (spec.size != 0) params.push_back("size=" + std::to_string(spec.size));
      break;
    case aug_kind::rotate:
      params.push_back("degrees=" + number(spec.degrees));
      break;
    case aug_kind::cutout:
      params.push_back("scale=" + range_text(spec.scale));
      params.push_back("ratio=" + range_text(spec.ratio));
      break;
    case aug_kind::distort:
      params.push_back("lambda=" + number(spec.lambda));
      break;
    case aug_kind::noise:
      params.push_back("sigma=" + range_text(spec.sigma));
      break;
    case aug_kind::blur:
      params.push_back("kernel=" + std::to_string(spec.kernel));
      params.push_back("sigma=" + range_text(spec.sigma));
      break;
    default:
      break;
  }
  if (!params.empty()) {
    out += "(";
    for (std::size_t i = 0; i < params.size(); ++i) out += (i ? "," : "") + params[i];
    out += ")";
  }
  return out;
}

aug_spec parse_spec(std::string_view text) {
  text = trim(text);
  const auto open = text.find('(');
  const std::string_view name = trim(text.substr(0, open));
  const auto kind = kind_from_string(name);
  if (!kind) throw config_error("unknown augmentation kind '" + std::string(name) + "'");
  aug_spec spec = default_spec(*kind);
  if (open != std::string_view::npos) {
    if (text.back() != ')') throw config_error("augmentation spec: missing ')' in '" + std::string(text) + "'");
    const std::string_view body = text.substr(open + 1, text.size() - open - 2);
    if (!trim(body).empty()) {
      for (std::string_view item : split_top_level(body)) {
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
          throw config_error("augmentation spec: expected key=value, got '" + std::string(item) + "'");
        }
        const std::string_view key = trim(item.substr(0, eq));
        const std::string_view value = trim(item.substr(eq + 1));
        const std::string ctx = std::string(name) + "." + std::string(key);
        const bool crop_like = *kind == aug_kind::crop_resize || *kind == aug_kind::cutout;
        if (crop_like && key == "scale") {
          spec.scale = parse_range(value, ctx);
        } else if (crop_like && key == "ratio") {
          spec.ratio = parse_range(value, ctx);
        } else if (*kind == aug_kind::crop_resize && key == "size") {
          const double v = parse_number(value, ctx);
          if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
            throw config_error("augmentation spec: size must be a non-negative integer");
          }
          spec.size = static_cast<std::size_t>(v);
        } else if (*kind == aug_kind::rotate && key == "degrees") {
          spec.degrees = parse_number(value, ctx);
        } else if (*kind == aug_kind::distort && key == "lambda") {
          spec.lambda = parse_number(value, ctx);
        } else if ((*kind == aug_kind::noise || *kind == aug_kind::blur) && key == "sigma") {
          spec.sigma = parse_range(value, ctx);
        } else if (*kind == aug_kind::blur && key == "kernel") {
          const double v = parse_number(value, ctx);
          if (v != static_cast<double>(static_cast<int>(v))) throw config_error("augmentation spec: kernel must be an integer");
          spec.kernel = static_cast<int>(v);
        } else {
          throw config_error("augmentation spec: unknown parameter '" + std::string(key) + "' for " +
                             std::string(name));
        }
      }
    }
  }
  try {
    validate(spec);
  } catch (const contract_error& e) {
    throw config_error(std::string("augmentation spec: ") + e.what());
  }
  return spec;
}

std::string format_pipeline(const pipeline& specs) {
  std::string out;
  for (std::size_t i = 0; i < specs.size(); ++i) out += (i ? "," : "") + format(specs[i]);
  return out;
}

pipeline parse_pipeline(std::string_view text) {
  if (trim(text).empty()) throw config_error("augmentation pipeline is empty");
  pipeline out;
  for (std::string_view part : split_top_level(text)) {
    if (part.empty()) throw config_error("augmentation pipeline: empty entry in '" + std::string(text) + "'");
    out.push_back(parse_spec(part));
  }
  return out;
}

image apply_spec(const image& img, const aug_spec& spec, seeded_rng& rng, draw_trace* trace) {
  validate(spec);
  switch (spec.kind) {
    case aug_kind::identity:
      return img;
    case aug_kind::crop_resize: {
      const std::size_t oh = spec.size ? spec.size : img.height;
      const std::size_t ow = spec.size ? spec.size : img.width;
      return random_resized_crop(img, spec.scale, spec.ratio, oh, ow, rng, trace);
    }
    case aug_kind::rotate:
      return rotate(img, spec.degrees, rng, trace);
    case aug_kind::cutout:
      return cutout(img, spec.scale, spec.ratio, rng, trace);
    case aug_kind::distort:
      return distort(img, spec.lambda, rng, trace);
    case aug_kind::noise:
      return gaussian_noise(img, spec.sigma, rng, trace);
    case aug_kind::blur:
      return gaussian_blur(img, spec.kernel, spec.sigma, rng, trace);
    case aug_kind::sobel:
      return sobel(img);
  }
  throw contract_error("apply_spec: unknown augmentation kind");
}

image apply_pipeline(const image& img, const pipeline& specs, seeded_rng& rng, draw_trace* trace) {
  if (specs.empty()) throw contract_error("apply_pipeline: empty pipeline");
  image out = img;
  for (const auto& spec : specs) out = apply_spec(out, spec, rng, trace);
  return out;
}

image rand_augment(const image& img, std::size_t n, const pipeline& pool, seeded_rng& rng, draw_trace* trace) {
  if (n < 1 || n > pool.size()) {
    throw contract_error("rand_augment: n = " + std::to_string(n) + " must lie in [1, " +
                         std::to_string(pool.size()) + "]");
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // partial Fisher-Yates: the first n slots are a uniform ordered sample
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(pool.size() - i));
    std::swap(order[i], order[j]);
  }
  image out = img;
  for (std::size_t i = 0; i < n; ++i) {
    if (trace) trace->add("pick", static_cast<double>(order[i]));
    out = apply_spec(out, pool[order[i]], rng, trace);
  }
  return out;
}

std::string_view to_string(policy_mode mode) {
  return mode == policy_mode::single_branch_compose ? "single_branch_compose" : "dual_symmetric";
}

std::optional<policy_mode> mode_from_string(std::string_view name) {
  if (name == "single_branch_compose") return policy_mode::single_branch_compose;
  if (name == "dual_symmetric") return policy_mode::dual_symmetric;
  return std::nullopt;
}

view_policy single_branch_compose(const aug_spec& t1, const aug_spec& t2) {
  view_policy p;
  p.branch1 = {default_spec(aug_kind::identity)};
  p.branch2 = {t1, t2};
  p.mode = policy_mode::single_branch_compose;
  return p;
}

view_policy dual_symmetric(const pipeline& specs) {
  view_policy p;
  p.branch1 = specs;
  p.branch2 = specs;
  p.mode = policy_mode::dual_symmetric;
  return p;
}

void validate(const view_policy& policy) {
  if (policy.branch1.empty() || policy.branch2.empty()) throw contract_error("view policy: empty branch");
  if (policy.mode == policy_mode::single_branch_compose &&
      !(policy.branch1.size() == 1 && policy.branch1.front().kind == aug_kind::identity)) {
    throw contract_error("view policy: single_branch_compose requires branch1 = [identity]");
  }
  for (const auto& s : policy.branch1) validate(s);
  for (const auto& s : policy.branch2) validate(s);
}

std::string policy_label(const view_policy& policy) {
  std::string label;
  for (const auto& s : policy.branch2) {
    if (s.kind == aug_kind::identity) continue;
    label += (label.empty() ? "" : "+") + std::string(to_string(s.kind));
  }
  if (label.empty()) label = "identity";
  if (policy.mode == policy_mode::dual_symmetric) label = "dual:" + label;
  return label;
}

std::pair<image, image> make_views(const image& img, const view_policy& policy, std::uint64_t seed,
                                   std::uint64_t sample_index) {
  validate(policy);
  seeded_rng r1(derive_seed(seed, {sample_index, 1}));
  seeded_rng r2(derive_seed(seed, {sample_index, 2}));
  image x1 = apply_pipeline(img, policy.branch1, r1);
  image x2 = apply_pipeline(img, policy.branch2, r2);
  return {std::move(x1), std::move(x2)};
}

}  // namespace siamgrid::augment
