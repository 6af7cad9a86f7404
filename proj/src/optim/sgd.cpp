#include "siamgrid/optim/sgd.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "siamgrid/errors.hpp"

namespace siamgrid::optim {

void sgd_step(const std::vector<diffcore::parameter>& params, sgd_state& state, double lr_t) {
  if (!std::isfinite(lr_t) || lr_t < 0.0) throw contract_error("sgd_step: learning rate must be finite and >= 0");
  // Validate first so a failing step leaves every parameter untouched.
  for (const auto& p : params) {
    if (p.value.requires_grad() && !p.value.has_grad()) {
      throw contract_error("sgd_step: trainable parameter '" + p.name + "' has no gradient");
    }
  }
  const float lr = static_cast<float>(lr_t);
  const float mom = static_cast<float>(state.momentum);
  const float wd = static_cast<float>(state.weight_decay);
  for (const auto& p : params) {
    if (!p.value.requires_grad()) continue;
    diffcore::tensor value = p.value;
    auto data = value.mutable_data();
    const auto grad = value.grad();
    auto& buf = state.buffers[p.name];
    if (buf.empty()) buf.assign(data.size(), 0.0f);
    if (buf.size() != data.size()) throw dimension_error("sgd_step: momentum buffer shape mismatch for " + p.name);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float g = grad[i] + wd * data[i];
      buf[i] = mom * buf[i] + g;
      data[i] = data[i] - lr * buf[i];
    }
  }
}

double cosine_lr(const cosine_schedule& s, double t) {
  if (s.total_steps < 1) throw contract_error("cosine_lr: total steps must be >= 1");
  if (s.min_lr > s.base_lr) throw contract_error("cosine_lr: min_lr exceeds base_lr");
  const double total = static_cast<double>(s.total_steps);
  if (!(t >= 0.0 && t <= total)) {
    throw contract_error("cosine_lr: step " + std::to_string(t) + " outside [0, " + std::to_string(s.total_steps) + "]");
  }
  return s.min_lr + 0.5 * (s.base_lr - s.min_lr) * (1.0 + std::cos(std::numbers::pi * t / total));
}

double scaled_lr(double lr, std::size_t batch_size) { return lr * static_cast<double>(batch_size) / 256.0; }

void save_sgd_state(const std::filesystem::path& dir, const sgd_state& state) {
  std::vector<diffcore::parameter> tensors;
  for (const auto& [name, buf] : state.buffers) {
    tensors.push_back({name, diffcore::tensor({buf.size()}, buf)});
  }
  diffcore::save_checkpoint(dir, tensors);
  std::ofstream out(dir / "sgd.json", std::ios::trunc);
  if (!out) throw io_error("cannot write optimizer state in " + dir.string());
  out << nlohmann::json{{"momentum", state.momentum}, {"weight_decay", state.weight_decay}}.dump() << '\n';
}

sgd_state load_sgd_state(const std::filesystem::path& dir) {
  std::ifstream in(dir / "sgd.json");
  if (!in) throw dependency_error("missing optimizer state in " + dir.string());
  sgd_state state;
  try {
    const auto j = nlohmann::json::parse(in);
    state.momentum = j.at("momentum").get<double>();
    state.weight_decay = j.at("weight_decay").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw contract_error(std::string("invalid optimizer state: ") + e.what());
  }
  for (const auto& [name, t] : diffcore::load_checkpoint(dir)) {
    state.buffers[name] = std::vector<float>(t.data().begin(), t.data().end());
  }
  return state;
}

}  // namespace siamgrid::optim
