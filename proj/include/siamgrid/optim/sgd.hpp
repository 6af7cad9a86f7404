#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "siamgrid/diffcore/parameters.hpp"

namespace siamgrid::optim {

/// Momentum buffers keyed by parameter name, plus the fixed hyperparameters.
struct sgd_state {
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::map<std::string, std::vector<float>> buffers;
};

/**
 * g = grad + wd * param; buf = momentum * buf + g; param -= lr_t * buf.
 * Parameters that do not require grad are skipped. A trainable parameter
 * without a gradient raises contract_error naming it.
 */
void sgd_step(const std::vector<diffcore::parameter>& params, sgd_state& state, double lr_t);

struct cosine_schedule {
  double base_lr = 0.05;
  double min_lr = 0.0;
  std::size_t total_steps = 1;
};

/// min_lr + (base_lr - min_lr) * (1 + cos(pi * t / T)) / 2 for 0 <= t <= T.
double cosine_lr(const cosine_schedule& schedule, double t);

/// Learning rate scaled by batch_size / 256.
double scaled_lr(double lr, std::size_t batch_size);

/// Stores buffers as a checkpoint directory plus the hyperparameters in its manifest sidecar.
void save_sgd_state(const std::filesystem::path& dir, const sgd_state& state);
sgd_state load_sgd_state(const std::filesystem::path& dir);

}  // namespace siamgrid::optim
