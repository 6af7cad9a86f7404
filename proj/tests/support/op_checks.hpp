#pragma once

// Finite-difference cases for every differentiable op and for the full
// SimSiam objective. Compiled once per precision; the including translation
// unit selects it through SIAMGRID_DIFFCORE_F64.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "siamgrid/augment/rng.hpp"
#include "siamgrid/diffcore/grad_check.hpp"
#include "siamgrid/diffcore/ops.hpp"
#include "siamgrid/simsiam/model.hpp"

namespace siamgrid::testing::inline SIAMGRID_PRECISION_NS {

using diffcore::real;
using diffcore::shape_t;
using diffcore::tensor;

struct op_check {
  std::string name;
  double max_rel_error = 0.0;
};

inline tensor random_tensor(const shape_t& shape, augment::seeded_rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::vector<real> data(diffcore::numel_of(shape));
  for (auto& v : data) v = static_cast<real>(rng.uniform(lo, hi));
  return tensor(shape, std::move(data), requires_grad);
}

/// Scalar probe of an op output: sum(out * R) with a fixed random R.
inline tensor project(const tensor& out, const tensor& r) { return diffcore::sum(diffcore::mul(out, r)); }

inline std::vector<op_check> run_op_checks(std::uint64_t seed, double eps) {
  namespace d = diffcore;
  augment::seeded_rng rng(augment::derive_seed(seed, {0x6f70}));
  std::vector<op_check> out;
  auto params = [&](const std::string& name, const std::function<tensor()>& f, std::vector<tensor> ps,
                    bool freeze = false) {
    out.push_back({name, d::grad_check_params(f, std::move(ps), eps, freeze).max_rel_error});
  };

  {
    auto x = random_tensor({3, 5}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({4}, rng);
    auto r = random_tensor({3, 4}, rng, -1, 1, false);
    params("linear", [&] { return project(d::linear(x, w, b), r); }, {x, w, b});
  }
  {
    auto x = random_tensor({2, 2, 5, 5}, rng), w = random_tensor({3, 2, 3, 3}, rng);
    auto r = random_tensor({2, 3, 5, 5}, rng, -1, 1, false);
    params("conv2d stride 1 pad 1", [&] { return project(d::conv2d(x, w, 1, 1), r); }, {x, w});
  }
  {
    auto x = random_tensor({2, 2, 6, 6}, rng), w = random_tensor({2, 2, 3, 3}, rng);
    auto r = random_tensor({2, 2, 3, 3}, rng, -1, 1, false);
    params("conv2d stride 2 pad 1", [&] { return project(d::conv2d(x, w, 2, 1), r); }, {x, w});
  }
  {
    auto x = random_tensor({4, 2, 3, 3}, rng), g = random_tensor({2}, rng, 0.5, 1.5), b = random_tensor({2}, rng);
    auto r = random_tensor({4, 2, 3, 3}, rng, -1, 1, false);
    auto stats = d::batchnorm_stats::for_channels(2);
    params("batchnorm2d train", [&] { return project(d::batchnorm2d(x, g, b, d::norm_mode::train, stats), r); },
           {x, g, b});
  }
  {
    auto x = random_tensor({3, 2, 3, 3}, rng), g = random_tensor({2}, rng, 0.5, 1.5), b = random_tensor({2}, rng);
    auto r = random_tensor({3, 2, 3, 3}, rng, -1, 1, false);
    auto stats = d::batchnorm_stats::for_channels(2);
    stats.running_mean = random_tensor({2}, rng, -0.5, 0.5, false);
    stats.running_var = random_tensor({2}, rng, 0.5, 2.0, false);
    params("batchnorm2d eval", [&] { return project(d::batchnorm2d(x, g, b, d::norm_mode::eval, stats), r); },
           {x, g, b});
  }
  {
    auto x = random_tensor({6, 4}, rng), g = random_tensor({4}, rng, 0.5, 1.5), b = random_tensor({4}, rng);
    auto r = random_tensor({6, 4}, rng, -1, 1, false);
    auto stats = d::batchnorm_stats::for_channels(4);
    params("batchnorm1d train", [&] { return project(d::batchnorm1d(x, g, b, d::norm_mode::train, stats), r); },
           {x, g, b});
  }
  {
    auto x = random_tensor({5, 4}, rng), g = random_tensor({4}, rng, 0.5, 1.5), b = random_tensor({4}, rng);
    auto r = random_tensor({5, 4}, rng, -1, 1, false);
    auto stats = d::batchnorm_stats::for_channels(4);
    stats.running_mean = random_tensor({4}, rng, -0.5, 0.5, false);
    stats.running_var = random_tensor({4}, rng, 0.5, 2.0, false);
    params("batchnorm1d eval", [&] { return project(d::batchnorm1d(x, g, b, d::norm_mode::eval, stats), r); },
           {x, g, b});
  }
  {
    auto x = random_tensor({4, 6}, rng);
    auto r = random_tensor({4, 6}, rng, -1, 1, false);
    params("relu", [&] { return project(d::relu(x), r); }, {x}, true);
  }
  {
    auto x = random_tensor({2, 3, 4, 4}, rng);
    auto r = random_tensor({2, 3}, rng, -1, 1, false);
    params("global_avg_pool", [&] { return project(d::global_avg_pool(x), r); }, {x});
  }
  {
    auto x = random_tensor({2, 2, 4, 4}, rng);
    auto r = random_tensor({2, 2, 2, 2}, rng, -1, 1, false);
    params("max_pool2d k2 s2", [&] { return project(d::max_pool2d(x, 2, 2), r); }, {x}, true);
  }
  {
    auto x = random_tensor({1, 2, 5, 5}, rng);
    auto r = random_tensor({1, 2, 2, 2}, rng, -1, 1, false);
    params("max_pool2d k3 s2", [&] { return project(d::max_pool2d(x, 3, 2), r); }, {x}, true);
  }
  {
    auto x = random_tensor({3, 5}, rng);
    auto r = random_tensor({3, 5}, rng, -1, 1, false);
    params("l2_normalize", [&] { return project(d::l2_normalize(x), r); }, {x});
  }
  {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    auto r = random_tensor({3, 4}, rng, -1, 1, false);
    params("add", [&] { return project(d::add(a, b), r); }, {a, b});
    params("mul", [&] { return project(d::mul(a, b), r); }, {a, b});
    params("scale", [&] { return project(d::scale(a, real(0.7)), r); }, {a});
    params("square", [&] { return project(d::square(a), r); }, {a});
    params("sum", [&] { return d::sum(a); }, {a});
    params("mean", [&] { return d::mean(a); }, {a});
    params("reshape", [&] { return project(d::reshape(a, {4, 3}), d::reshape(r, {4, 3})); }, {a});
  }
  {
    auto a = random_tensor({3, 5}, rng), b = random_tensor({3, 5}, rng);
    auto r = random_tensor({3}, rng, -1, 1, false);
    params("rowwise_dot", [&] { return project(d::rowwise_dot(a, b), r); }, {a, b});
  }
  {
    auto logits = random_tensor({4, 3}, rng, -3, 3);
    std::vector<real> t(12), m(12);
    for (std::size_t i = 0; i < 12; ++i) {
      t[i] = rng.coin() ? real(1) : real(0);
      m[i] = i % 5 == 2 ? real(0) : real(1);
    }
    tensor targets({4, 3}, t), mask({4, 3}, m);
    params("bce_with_logits", [&] { return d::bce_with_logits(logits, targets, mask); }, {logits});
  }
  return out;
}

/// Encoder stem 4, stages {4, 8} with one basic block each, feature_dim 8, proj_dim 16.
inline simsiam::model_config tiny_model_config() {
  simsiam::model_config mc;
  mc.encoder.stem_width = 4;
  mc.encoder.stage_widths = {4, 8};
  mc.encoder.blocks_per_stage = {1, 1};
  mc.encoder.feature_dim = 8;
  mc.proj_dim = 16;
  return mc;
}

struct model_check {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t parameters_checked = 0;
};

/**
 * Gradient of the SimSiam objective with respect to every model parameter on
 * a batch of four 1x8x8 view pairs. The targets z1, z2 are evaluated once and
 * held fixed, so the finite differences probe exactly the function whose
 * gradient back-propagation computes (stop-gradient blocks the target path).
 */
inline model_check run_model_check(std::uint64_t seed, double eps, bool freeze_patterns) {
  simsiam::simsiam_model model(tiny_model_config(), seed);
  augment::seeded_rng rng(augment::derive_seed(seed, {0x6d6f}));
  auto x1 = random_tensor({4, 1, 8, 8}, rng, 0, 1, false);
  auto x2 = random_tensor({4, 1, 8, 8}, rng, 0, 1, false);
  tensor z1, z2;
  {
    diffcore::no_grad_guard guard;
    auto o = simsiam::forward_views(model, x1, x2);
    z1 = o.z1.clone();
    z2 = o.z2.clone();
  }
  auto f = [&] {
    auto o = simsiam::forward_views(model, x1, x2);
    return simsiam::simsiam_loss(o.p1, o.p2, z1, z2);
  };
  model_check result;
  for (const auto& p : model.registry().parameters()) {
    const auto r = diffcore::grad_check_params(f, {p.value}, eps, freeze_patterns);
    ++result.parameters_checked;
    if (r.max_rel_error >= result.max_rel_error) {
      result.max_rel_error = r.max_rel_error;
      result.worst_parameter = p.name;
    }
  }
  return result;
}

}  // namespace siamgrid::testing
