#include "gradient_suite.hpp"

#include <chrono>

#include "op_checks.hpp"

namespace siamgrid::acceptance {

static_assert(std::is_same_v<diffcore::real, double>);

gradient_suite_result run_gradient_suite(std::uint64_t seeds, double op_eps, double model_eps) {
  const auto start = std::chrono::steady_clock::now();
  gradient_suite_result r;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    for (const auto& c : testing::run_op_checks(seed, op_eps)) {
      ++r.checks;
      if (c.max_rel_error >= r.worst_op_error) {
        r.worst_op_error = c.max_rel_error;
        r.worst_op = c.name + " (seed " + std::to_string(seed) + ")";
      }
    }
    const auto m = testing::run_model_check(seed, model_eps, true);
    r.checks += m.parameters_checked;
    if (m.max_rel_error >= r.worst_model_error) {
      r.worst_model_error = m.max_rel_error;
      r.worst_parameter = m.worst_parameter + " (seed " + std::to_string(seed) + ")";
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace siamgrid::acceptance
