#include "siamgrid/diffcore/tensor.hpp"

#include <atomic>
#include <sstream>

#include "siamgrid/errors.hpp"

namespace siamgrid::diffcore::inline SIAMGRID_PRECISION_NS {

namespace {
thread_local bool t_grad_enabled = true;
std::atomic<std::size_t> g_near_zero_norms{0};
}  // namespace

std::size_t numel_of(const shape_t& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const shape_t& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

tensor::tensor(shape_t shape, std::vector<real> data, bool requires_grad) {
  if (shape.empty()) throw dimension_error("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw dimension_error("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (numel_of(shape) != data.size()) {
    throw dimension_error("data length " + std::to_string(data.size()) + " does not match shape " +
                          shape_str(shape));
  }
  m_impl = std::make_shared<tensor_storage>();
  m_impl->shape = std::move(shape);
  m_impl->data = std::move(data);
  m_impl->requires_grad = requires_grad;
}

tensor tensor::zeros(shape_t shape, bool requires_grad) {
  auto n = numel_of(shape);
  return tensor(std::move(shape), std::vector<real>(n, real(0)), requires_grad);
}

tensor tensor::full(shape_t shape, real value, bool requires_grad) {
  auto n = numel_of(shape);
  return tensor(std::move(shape), std::vector<real>(n, value), requires_grad);
}

tensor tensor::scalar(real value) { return tensor({1}, {value}); }

real tensor::item() const {
  if (numel() != 1) throw contract_error("item() on non-scalar tensor " + shape_str(shape()));
  return m_impl->data[0];
}

void tensor::zero_grad() {
  if (m_impl->grad.empty()) {
    m_impl->grad.assign(m_impl->data.size(), real(0));
  } else {
    std::fill(m_impl->grad.begin(), m_impl->grad.end(), real(0));
  }
}

tensor tensor::clone() const { return tensor(shape(), m_impl->data, false); }

tape& tape::current() {
  thread_local tape t;
  return t;
}

bool grad_enabled() { return t_grad_enabled; }

no_grad_guard::no_grad_guard() : m_previous(t_grad_enabled) { t_grad_enabled = false; }
no_grad_guard::~no_grad_guard() { t_grad_enabled = m_previous; }

void accumulate_grad(tensor_storage& storage, std::span<const real> values) {
  if (storage.grad.empty()) {
    storage.grad.assign(values.begin(), values.end());
    return;
  }
  for (std::size_t i = 0; i < values.size(); ++i) storage.grad[i] += values[i];
}

void accumulate_grad(tensor_storage& storage, std::size_t index, real value) {
  if (storage.grad.empty()) storage.grad.assign(storage.data.size(), real(0));
  storage.grad[index] += value;
}

void backward(const tensor& loss) {
  if (!loss.defined()) throw contract_error("backward() on undefined tensor");
  if (loss.numel() != 1) {
    throw contract_error("backward() requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  auto& t = tape::current();
  if (t.empty()) throw contract_error("backward() called with an empty tape");
  if (!loss.requires_grad()) throw contract_error("loss does not depend on any tensor requiring grad");

  accumulate_grad(*loss.impl(), 0, real(1));
  const auto& nodes = t.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward(*it);
  }
  t.clear();
}

std::size_t near_zero_norm_events() { return g_near_zero_norms.load(); }
void reset_near_zero_norm_events() { g_near_zero_norms.store(0); }
void note_near_zero_norm() { g_near_zero_norms.fetch_add(1); }

}  // namespace siamgrid::diffcore
