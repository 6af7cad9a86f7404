#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "siamgrid/diffcore/precision.hpp"

namespace siamgrid::diffcore::inline SIAMGRID_PRECISION_NS {

using shape_t = std::vector<std::size_t>;

std::size_t numel_of(const shape_t& shape);
std::string shape_str(const shape_t& shape);

struct tensor_storage {
  shape_t shape;
  std::vector<real> data;
  std::vector<real> grad;  // empty means "no gradient yet"
  bool requires_grad = false;
};

/**
 * Shared handle to an n-dimensional array of `real` in row-major order.
 *
 * Copies of a tensor alias the same storage. The shape never changes after
 * construction; reshape() yields a new tensor. Data is only mutated through
 * mutable_data(), which is reserved for parameter initialisation and
 * optimizer updates.
 */
class tensor {
public:
  tensor() = default;
  tensor(shape_t shape, std::vector<real> data, bool requires_grad = false);

  static tensor zeros(shape_t shape, bool requires_grad = false);
  static tensor full(shape_t shape, real value, bool requires_grad = false);
  static tensor scalar(real value);

  bool defined() const noexcept { return static_cast<bool>(m_impl); }
  const shape_t& shape() const { return m_impl->shape; }
  std::size_t rank() const { return m_impl->shape.size(); }
  std::size_t dim(std::size_t i) const { return m_impl->shape.at(i); }
  std::size_t numel() const { return m_impl->data.size(); }

  std::span<const real> data() const { return m_impl->data; }
  std::span<real> mutable_data() { return m_impl->data; }
  real item() const;
  real at(std::size_t flat_index) const { return m_impl->data.at(flat_index); }

  bool requires_grad() const { return m_impl->requires_grad; }
  void set_requires_grad(bool value) { m_impl->requires_grad = value; }

  bool has_grad() const { return !m_impl->grad.empty(); }
  std::span<const real> grad() const { return m_impl->grad; }
  std::span<real> mutable_grad() { return m_impl->grad; }
  void zero_grad();
  void clear_grad() { m_impl->grad.clear(); }

  /// Value copy that does not share storage and carries no gradient.
  tensor clone() const;

  const std::shared_ptr<tensor_storage>& impl() const { return m_impl; }

private:
  std::shared_ptr<tensor_storage> m_impl;
};

struct tape_node {
  std::string op;
  std::vector<std::shared_ptr<tensor_storage>> inputs;
  std::shared_ptr<tensor_storage> output;
  std::function<void(const tape_node&)> backward;
};

/// Define-by-run record of differentiable operations for one execution context.
class tape {
public:
  void record(tape_node node) { m_nodes.push_back(std::move(node)); }
  void clear() { m_nodes.clear(); }
  std::size_t size() const { return m_nodes.size(); }
  bool empty() const { return m_nodes.empty(); }
  const std::vector<tape_node>& nodes() const { return m_nodes; }

  /// The tape of the calling thread.
  static tape& current();

private:
  std::vector<tape_node> m_nodes;
};

bool grad_enabled();

/// Disables recording on the current thread for the guard's lifetime.
class no_grad_guard {
public:
  no_grad_guard();
  ~no_grad_guard();
  no_grad_guard(const no_grad_guard&) = delete;
  no_grad_guard& operator=(const no_grad_guard&) = delete;

private:
  bool m_previous;
};

/// Reverse-mode accumulation from a scalar loss. Clears the tape afterwards.
void backward(const tensor& loss);

/// Adds `values` into the gradient buffer of `storage`, allocating it on first use.
void accumulate_grad(tensor_storage& storage, std::span<const real> values);
void accumulate_grad(tensor_storage& storage, std::size_t index, real value);

/// Count of l2_normalize rows clamped by epsilon since the last reset.
std::size_t near_zero_norm_events();
void reset_near_zero_norm_events();
void note_near_zero_norm();

}  // namespace siamgrid::diffcore
