#include "siamgrid/diffcore/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "siamgrid/diffcore/ops.hpp"
#include "siamgrid/errors.hpp"

namespace siamgrid::diffcore::inline SIAMGRID_PRECISION_NS {

namespace {

void check_eps(double eps) {
  if (!(eps >= 1e-5 && eps <= 1e-2)) throw contract_error("grad_check: eps must lie in [1e-5, 1e-2]");
}

double evaluate(const std::function<tensor()>& f) {
  no_grad_guard guard;
  pattern_guard::rewind();
  const tensor y = f();
  if (y.numel() != 1) throw contract_error("grad_check: function must be scalar-valued");
  const double v = y.item();
  if (!std::isfinite(v)) throw numeric_error("grad_check: non-finite function value");
  return v;
}

void update(grad_check_result& r, std::size_t index, double analytic, double numeric) {
  if (!std::isfinite(analytic)) throw numeric_error("grad_check: non-finite analytic gradient");
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  const double err = std::abs(analytic - numeric) / denom;
  if (index == 0 || err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst_index = index;
    r.analytic_at_worst = analytic;
    r.numeric_at_worst = numeric;
  }
}

// Central difference over the representable step actually taken in the element type.
template <class Eval>
double central_difference(real& slot, double eps, Eval&& eval) {
  const real original = slot;
  const real hi = static_cast<real>(original + eps);
  const real lo = static_cast<real>(original - eps);
  slot = hi;
  const double up = eval();
  slot = lo;
  const double down = eval();
  slot = original;
  return (up - down) / (static_cast<double>(hi) - static_cast<double>(lo));
}

}  // namespace

grad_check_result grad_check(const std::function<tensor(const tensor&)>& f, const tensor& x, double eps,
                             bool freeze_patterns) {
  check_eps(eps);
  std::optional<pattern_guard> patterns;
  if (freeze_patterns) patterns.emplace(pattern_mode::record);
  tape::current().clear();
  tensor probe(x.shape(), std::vector<real>(x.data().begin(), x.data().end()), true);
  std::vector<real> analytic(probe.numel(), real(0));
  {
    const tensor y = f(probe);
    if (y.numel() != 1) throw contract_error("grad_check: function must be scalar-valued");
    if (!std::isfinite(y.item())) throw numeric_error("grad_check: non-finite function value");
    if (y.requires_grad() && !tape::current().empty()) {
      backward(y);
      if (probe.has_grad()) analytic.assign(probe.grad().begin(), probe.grad().end());
    }
    tape::current().clear();
  }

  if (patterns) {
    patterns.reset();
    patterns.emplace(pattern_mode::replay);
  }
  grad_check_result result;
  auto data = probe.mutable_data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double fd = central_difference(data[i], eps, [&] { return evaluate([&] { return f(probe); }); });
    update(result, i, analytic[i], fd);
  }
  return result;
}

grad_check_result grad_check_params(const std::function<tensor()>& f, std::vector<tensor> params, double eps,
                                    bool freeze_patterns) {
  check_eps(eps);
  std::optional<pattern_guard> patterns;
  if (freeze_patterns) patterns.emplace(pattern_mode::record);
  tape::current().clear();
  for (auto& p : params) p.clear_grad();
  {
    const tensor y = f();
    if (y.numel() != 1) throw contract_error("grad_check: function must be scalar-valued");
    backward(y);
  }
  if (patterns) {
    patterns.reset();
    patterns.emplace(pattern_mode::replay);
  }

  grad_check_result result;
  std::size_t flat = 0;
  for (auto& p : params) {
    std::vector<real> analytic(p.numel(), real(0));
    if (p.has_grad()) analytic.assign(p.grad().begin(), p.grad().end());
    auto data = p.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i, ++flat) {
      const double fd = central_difference(data[i], eps, [&] { return evaluate(f); });
      update(result, flat, analytic[i], fd);
    }
  }
  return result;
}

}  // namespace siamgrid::diffcore
