#pragma once

#include <optional>

#include "siamgrid/diffcore/tensor.hpp"

namespace siamgrid::diffcore::inline SIAMGRID_PRECISION_NS {

// Layer primitives. Each op records a backward rule on the current tape when
// gradients are enabled and at least one input requires grad.

/// out[n,o] = sum_i x[n,i] * weight[o,i] + bias[o]
tensor linear(const tensor& x, const tensor& weight, const std::optional<tensor>& bias = std::nullopt);

/// Cross-correlation over [N,C,H,W] with a [F,C,k,k] kernel, no bias.
tensor conv2d(const tensor& x, const tensor& weight, int stride = 1, int padding = 0);

enum class norm_mode { train, eval };

struct batchnorm_stats {
  tensor running_mean;
  tensor running_var;
  real momentum = real(0.1);
  real eps = real(1e-5);

  static batchnorm_stats for_channels(std::size_t channels);
};

/// Per-channel normalisation of [N,C,H,W] input.
tensor batchnorm2d(const tensor& x, const tensor& gamma, const tensor& beta, norm_mode mode,
                   batchnorm_stats& stats);

/// Per-feature normalisation of [N,D] input.
tensor batchnorm1d(const tensor& x, const tensor& gamma, const tensor& beta, norm_mode mode,
                   batchnorm_stats& stats);

tensor relu(const tensor& x);
tensor global_avg_pool(const tensor& x);
tensor max_pool2d(const tensor& x, int kernel, int stride);

/// How relu and max_pool2d choose their active inputs on the calling thread.
/// `record` evaluates normally and appends each call's selection (relu mask,
/// pool argmax); `replay` reuses the recorded selections in call order, which
/// turns a network into the smooth function of its active piece.
enum class pattern_mode { live, record, replay };

/// Sets the pattern mode for the guard's lifetime. Entering `record` discards
/// earlier selections; entering `replay` starts again from the first one.
class pattern_guard {
public:
  explicit pattern_guard(pattern_mode mode);
  ~pattern_guard();
  pattern_guard(const pattern_guard&) = delete;
  pattern_guard& operator=(const pattern_guard&) = delete;

  /// Restarts replay from the first recorded selection.
  static void rewind();

private:
  pattern_mode m_previous;
};

inline constexpr real l2_epsilon = real(1e-12);

/// Row-wise division by the Euclidean norm, clamped below by l2_epsilon.
tensor l2_normalize(const tensor& x);

/// Identity in value; nothing is recorded, so no gradient flows back through it.
tensor stop_gradient(const tensor& x);

tensor add(const tensor& a, const tensor& b);
tensor mul(const tensor& a, const tensor& b);
tensor scale(const tensor& x, real factor);
tensor sum(const tensor& x);
tensor mean(const tensor& x);
tensor square(const tensor& x);

/// [N,D] x [N,D] -> [N] dot products.
tensor rowwise_dot(const tensor& a, const tensor& b);

tensor reshape(const tensor& x, shape_t shape);

/// Mean of the numerically stable sigmoid cross-entropy over cells with mask > 0.
tensor bce_with_logits(const tensor& logits, const tensor& targets, const tensor& mask);

/// Elementwise logistic function (no gradient).
tensor sigmoid(const tensor& x);

}  // namespace siamgrid::diffcore
