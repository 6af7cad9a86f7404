#pragma once

#include <functional>
#include <vector>

#include "siamgrid/diffcore/tensor.hpp"

namespace siamgrid::diffcore::inline SIAMGRID_PRECISION_NS {

struct grad_check_result {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/**
 * Compares the reverse-mode gradient of a scalar function against central
 * differences. The relative error of one coordinate is
 * |analytic - fd| / max(|analytic|, |fd|, 1e-8); the maximum is returned.
 *
 * `eps` must lie in [1e-5, 1e-2]. Non-finite function values raise numeric_error.
 *
 * With `freeze_patterns`, the relu masks and pooling choices of the analytic
 * pass are replayed during the perturbed evaluations (see pattern_guard), so
 * a perturbation that crosses a kink does not mix two linear pieces.
 */
grad_check_result grad_check(const std::function<tensor(const tensor&)>& f, const tensor& x, double eps,
                             bool freeze_patterns = false);

/// Same check over every coordinate of `params`, perturbed in place and restored.
grad_check_result grad_check_params(const std::function<tensor()>& f, std::vector<tensor> params, double eps,
                                    bool freeze_patterns = false);

}  // namespace siamgrid::diffcore
