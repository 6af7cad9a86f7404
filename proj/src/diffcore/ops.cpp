#include "siamgrid/diffcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "siamgrid/errors.hpp"

namespace siamgrid::diffcore::inline SIAMGRID_PRECISION_NS {

namespace {

using row_matrix = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using matrix_map = Eigen::Map<row_matrix>;
using const_matrix_map = Eigen::Map<const row_matrix>;

bool should_record(std::initializer_list<const tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const auto* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <class Fn>
void record(const char* op, std::vector<std::shared_ptr<tensor_storage>> inputs, tensor& out, Fn&& fn) {
  out.set_requires_grad(true);
  tape_node node;
  node.op = op;
  node.inputs = std::move(inputs);
  node.output = out.impl();
  node.backward = std::forward<Fn>(fn);
  tape::current().record(std::move(node));
}

void require_rank(const tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw dimension_error(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                          shape_str(x.shape()));
  }
}

void require_same_shape(const tensor& a, const tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw dimension_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
  }
}

struct pattern_state {
  pattern_mode mode = pattern_mode::live;
  std::vector<std::vector<std::uint32_t>> selections;
  std::size_t cursor = 0;
};

pattern_state& patterns() {
  thread_local pattern_state state;
  return state;
}

// Returns the recorded selection for this call in replay mode, else nullptr.
const std::vector<std::uint32_t>* replayed_selection(std::size_t expected, const char* op) {
  auto& st = patterns();
  if (st.mode != pattern_mode::replay) return nullptr;
  if (st.cursor >= st.selections.size() || st.selections[st.cursor].size() != expected) {
    throw contract_error(std::string(op) + ": replayed call does not match the recorded pattern");
  }
  return &st.selections[st.cursor++];
}

void note_selection(const std::vector<std::uint32_t>& selection) {
  auto& st = patterns();
  if (st.mode == pattern_mode::record) st.selections.push_back(selection);
}

struct bn_layout {
  std::size_t n, c, s;
};

tensor batchnorm_impl(const tensor& x, const tensor& gamma, const tensor& beta, norm_mode mode,
                      batchnorm_stats& stats, bn_layout layout, const char* op) {
  const auto [n, c, s] = layout;
  if (gamma.numel() != c || beta.numel() != c) {
    throw dimension_error(std::string(op) + ": gamma/beta must have " + std::to_string(c) + " entries");
  }
  if (stats.running_mean.numel() != c || stats.running_var.numel() != c) {
    throw dimension_error(std::string(op) + ": running stats must have " + std::to_string(c) + " entries");
  }
  const auto xd = x.data();
  const auto g = gamma.data();
  const auto b = beta.data();
  std::vector<real> out(xd.size());
  std::vector<real> xhat(xd.size());
  std::vector<real> inv_std(c);
  const double count = static_cast<double>(n * s);

  if (mode == norm_mode::train) {
    if (n < 2) throw contract_error(std::string(op) + ": degenerate batch of size 1 in train mode");
    auto rm = stats.running_mean.mutable_data();
    auto rv = stats.running_var.mutable_data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const real* p = xd.data() + (i * c + ch) * s;
        for (std::size_t k = 0; k < s; ++k) acc += p[k];
      }
      const double mu = acc / count;
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const real* p = xd.data() + (i * c + ch) * s;
        for (std::size_t k = 0; k < s; ++k) {
          const double d = p[k] - mu;
          sq += d * d;
        }
      }
      const double var = sq / count;
      const real is = static_cast<real>(1.0 / std::sqrt(var + stats.eps));
      inv_std[ch] = is;
      const real muf = static_cast<real>(mu);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = (i * c + ch) * s;
        for (std::size_t k = 0; k < s; ++k) {
          const real h = (xd[base + k] - muf) * is;
          xhat[base + k] = h;
          out[base + k] = g[ch] * h + b[ch];
        }
      }
      const double unbiased = count > 1 ? sq / (count - 1) : var;
      rm[ch] = (real(1) - stats.momentum) * rm[ch] + stats.momentum * muf;
      rv[ch] = (real(1) - stats.momentum) * rv[ch] + stats.momentum * static_cast<real>(unbiased);
    }
  } else {
    const auto rm = stats.running_mean.data();
    const auto rv = stats.running_var.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
      const real is = real(1) / std::sqrt(rv[ch] + stats.eps);
      inv_std[ch] = is;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = (i * c + ch) * s;
        for (std::size_t k = 0; k < s; ++k) {
          const real h = (xd[base + k] - rm[ch]) * is;
          xhat[base + k] = h;
          out[base + k] = g[ch] * h + b[ch];
        }
      }
    }
  }

  tensor result(x.shape(), std::move(out));
  if (should_record({&x, &gamma, &beta})) {
    record(op, {x.impl(), gamma.impl(), beta.impl()}, result,
           [xhat = std::move(xhat), inv_std = std::move(inv_std), layout, mode](const tape_node& node) {
             const auto [n, c, s] = layout;
             const auto& dy = node.output->grad;
             const auto& g = node.inputs[1]->data;
             std::vector<real> dgamma(c, real(0)), dbeta(c, real(0));
             std::vector<real> dx(node.inputs[0]->requires_grad ? dy.size() : 0);
             const double count = static_cast<double>(n * s);
             for (std::size_t ch = 0; ch < c; ++ch) {
               double sum_dy = 0.0, sum_dy_xhat = 0.0;
               for (std::size_t i = 0; i < n; ++i) {
                 const std::size_t base = (i * c + ch) * s;
                 for (std::size_t k = 0; k < s; ++k) {
                   sum_dy += dy[base + k];
                   sum_dy_xhat += static_cast<double>(dy[base + k]) * xhat[base + k];
                 }
               }
               dgamma[ch] = static_cast<real>(sum_dy_xhat);
               dbeta[ch] = static_cast<real>(sum_dy);
               if (dx.empty()) continue;
               const real scale_ = g[ch] * inv_std[ch];
               if (mode == norm_mode::train) {
                 const real mean_dy = static_cast<real>(sum_dy / count);
                 const real mean_dy_xhat = static_cast<real>(sum_dy_xhat / count);
                 for (std::size_t i = 0; i < n; ++i) {
                   const std::size_t base = (i * c + ch) * s;
                   for (std::size_t k = 0; k < s; ++k) {
                     dx[base + k] = scale_ * (dy[base + k] - mean_dy - xhat[base + k] * mean_dy_xhat);
                   }
                 }
               } else {
                 for (std::size_t i = 0; i < n; ++i) {
                   const std::size_t base = (i * c + ch) * s;
                   for (std::size_t k = 0; k < s; ++k) dx[base + k] = scale_ * dy[base + k];
                 }
               }
             }
             if (!dx.empty()) accumulate_grad(*node.inputs[0], dx);
             if (node.inputs[1]->requires_grad) accumulate_grad(*node.inputs[1], dgamma);
             if (node.inputs[2]->requires_grad) accumulate_grad(*node.inputs[2], dbeta);
           });
  }
  return result;
}

}  // namespace

pattern_guard::pattern_guard(pattern_mode mode) : m_previous(patterns().mode) {
  auto& st = patterns();
  st.mode = mode;
  if (mode == pattern_mode::record) st.selections.clear();
  st.cursor = 0;
}

pattern_guard::~pattern_guard() { patterns().mode = m_previous; }

void pattern_guard::rewind() { patterns().cursor = 0; }

batchnorm_stats batchnorm_stats::for_channels(std::size_t channels) {
  batchnorm_stats s;
  s.running_mean = tensor::zeros({channels});
  s.running_var = tensor::full({channels}, real(1));
  return s;
}

tensor linear(const tensor& x, const tensor& weight, const std::optional<tensor>& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t n = x.dim(0), din = x.dim(1), dout = weight.dim(0);
  if (weight.dim(1) != din) {
    throw dimension_error("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                          shape_str(weight.shape()));
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != dout)) {
    throw dimension_error("linear: bias " + shape_str(bias->shape()) + " incompatible with weight " +
                          shape_str(weight.shape()));
  }
  std::vector<real> out(n * dout);
  const_matrix_map X(x.data().data(), n, din);
  const_matrix_map W(weight.data().data(), dout, din);
  matrix_map Y(out.data(), n, dout);
  Y.noalias() = X * W.transpose();
  if (bias) {
    const auto b = bias->data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < dout; ++o) out[i * dout + o] += b[o];
  }
  tensor result({n, dout}, std::move(out));
  const tensor* bias_ptr = bias ? &*bias : nullptr;
  if (should_record({&x, &weight, bias_ptr})) {
    std::vector<std::shared_ptr<tensor_storage>> inputs{x.impl(), weight.impl()};
    if (bias) inputs.push_back(bias->impl());
    record("linear", std::move(inputs), result, [n, din, dout](const tape_node& node) {
      const_matrix_map dY(node.output->grad.data(), n, dout);
      auto& xs = *node.inputs[0];
      auto& ws = *node.inputs[1];
      if (xs.requires_grad) {
        std::vector<real> dx(n * din);
        matrix_map dX(dx.data(), n, din);
        dX.noalias() = dY * const_matrix_map(ws.data.data(), dout, din);
        accumulate_grad(xs, dx);
      }
      if (ws.requires_grad) {
        std::vector<real> dw(dout * din);
        matrix_map dW(dw.data(), dout, din);
        dW.noalias() = dY.transpose() * const_matrix_map(xs.data.data(), n, din);
        accumulate_grad(ws, dw);
      }
      if (node.inputs.size() > 2 && node.inputs[2]->requires_grad) {
        std::vector<real> db(dout, real(0));
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t o = 0; o < dout; ++o) db[o] += dY(i, o);
        accumulate_grad(*node.inputs[2], db);
      }
    });
  }
  return result;
}

tensor conv2d(const tensor& x, const tensor& weight, int stride, int padding) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d");
  if (stride < 1) throw contract_error("conv2d: stride must be >= 1");
  if (padding < 0) throw contract_error("conv2d: padding must be >= 0");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t f = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c || weight.dim(3) != k) {
    throw dimension_error("conv2d: input " + shape_str(x.shape()) + " incompatible with weight " +
                          shape_str(weight.shape()));
  }
  const std::size_t p = static_cast<std::size_t>(padding);
  if (k > h + 2 * p || k > w + 2 * p) {
    throw dimension_error("conv2d: kernel " + shape_str(weight.shape()) + " larger than padded input " +
                          shape_str(x.shape()));
  }
  const std::size_t s = static_cast<std::size_t>(stride);
  const std::size_t ho = (h + 2 * p - k) / s + 1, wo = (w + 2 * p - k) / s + 1;
  const std::size_t plane = ho * wo, rows = c * k * k, cols_n = n * plane;

  auto cols = std::make_shared<std::vector<real>>(rows * cols_n, real(0));
  const auto xd = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        real* row = cols->data() + ((ch * k + ky) * k + kx) * cols_n;
        for (std::size_t i = 0; i < n; ++i) {
          const real* src = xd.data() + (i * c + ch) * h * w;
          real* dst = row + i * plane;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(p);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(p);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              dst[oy * wo + ox] = src[iy * w + ix];
            }
          }
        }
      }
    }
  }

  std::vector<real> y(f * cols_n);
  {
    const_matrix_map W(weight.data().data(), f, rows);
    const_matrix_map C(cols->data(), rows, cols_n);
    matrix_map Y(y.data(), f, cols_n);
    Y.noalias() = W * C;
  }
  std::vector<real> out(n * f * plane);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < f; ++o)
      std::copy_n(y.data() + o * cols_n + i * plane, plane, out.data() + (i * f + o) * plane);

  tensor result({n, f, ho, wo}, std::move(out));
  if (should_record({&x, &weight})) {
    record("conv2d", {x.impl(), weight.impl()}, result,
           [cols, n, c, h, w, f, k, s, p, ho, wo](const tape_node& node) {
             const std::size_t plane = ho * wo, rows = c * k * k, cols_n = n * plane;
             std::vector<real> dy(f * cols_n);
             const auto& g = node.output->grad;
             for (std::size_t i = 0; i < n; ++i)
               for (std::size_t o = 0; o < f; ++o)
                 std::copy_n(g.data() + (i * f + o) * plane, plane, dy.data() + o * cols_n + i * plane);
             const_matrix_map dY(dy.data(), f, cols_n);
             auto& xs = *node.inputs[0];
             auto& ws = *node.inputs[1];
             if (ws.requires_grad) {
               std::vector<real> dw(f * rows);
               matrix_map dW(dw.data(), f, rows);
               dW.noalias() = dY * const_matrix_map(cols->data(), rows, cols_n).transpose();
               accumulate_grad(ws, dw);
             }
             if (xs.requires_grad) {
               std::vector<real> dcols(rows * cols_n);
               matrix_map dC(dcols.data(), rows, cols_n);
               dC.noalias() = const_matrix_map(ws.data.data(), f, rows).transpose() * dY;
               std::vector<real> dx(n * c * h * w, real(0));
               for (std::size_t ch = 0; ch < c; ++ch) {
                 for (std::size_t ky = 0; ky < k; ++ky) {
                   for (std::size_t kx = 0; kx < k; ++kx) {
                     const real* row = dcols.data() + ((ch * k + ky) * k + kx) * cols_n;
                     for (std::size_t i = 0; i < n; ++i) {
                       real* dst = dx.data() + (i * c + ch) * h * w;
                       const real* src = row + i * plane;
                       for (std::size_t oy = 0; oy < ho; ++oy) {
                         const std::ptrdiff_t iy =
                             static_cast<std::ptrdiff_t>(oy * s + ky) - static_cast<std::ptrdiff_t>(p);
                         if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                         for (std::size_t ox = 0; ox < wo; ++ox) {
                           const std::ptrdiff_t ix =
                               static_cast<std::ptrdiff_t>(ox * s + kx) - static_cast<std::ptrdiff_t>(p);
                           if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                           dst[iy * w + ix] += src[oy * wo + ox];
                         }
                       }
                     }
                   }
                 }
               }
               accumulate_grad(xs, dx);
             }
           });
  }
  return result;
}

tensor batchnorm2d(const tensor& x, const tensor& gamma, const tensor& beta, norm_mode mode,
                   batchnorm_stats& stats) {
  require_rank(x, 4, "batchnorm2d");
  return batchnorm_impl(x, gamma, beta, mode, stats, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)},
                        "batchnorm2d");
}

tensor batchnorm1d(const tensor& x, const tensor& gamma, const tensor& beta, norm_mode mode,
                   batchnorm_stats& stats) {
  require_rank(x, 2, "batchnorm1d");
  return batchnorm_impl(x, gamma, beta, mode, stats, {x.dim(0), x.dim(1), 1}, "batchnorm1d");
}

tensor relu(const tensor& x) {
  const auto xd = x.data();
  std::vector<std::uint32_t> active(xd.size());
  if (const auto* replay = replayed_selection(xd.size(), "relu")) {
    active = *replay;
  } else {
    for (std::size_t i = 0; i < xd.size(); ++i) active[i] = xd[i] > real(0);
    note_selection(active);
  }
  std::vector<real> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = active[i] ? xd[i] : real(0);
  tensor result(x.shape(), std::move(out));
  if (should_record({&x})) {
    record("relu", {x.impl()}, result, [active = std::move(active)](const tape_node& node) {
      const auto& g = node.output->grad;
      std::vector<real> dx(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] = active[i] ? g[i] : real(0);
      accumulate_grad(*node.inputs[0], dx);
    });
  }
  return result;
}

tensor global_avg_pool(const tensor& x) {
  require_rank(x, 4, "global_avg_pool");
  const std::size_t n = x.dim(0), c = x.dim(1), s = x.dim(2) * x.dim(3);
  const auto xd = x.data();
  std::vector<real> out(n * c);
  for (std::size_t i = 0; i < n * c; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s; ++k) acc += xd[i * s + k];
    out[i] = static_cast<real>(acc / static_cast<double>(s));
  }
  tensor result({n, c}, std::move(out));
  if (should_record({&x})) {
    record("global_avg_pool", {x.impl()}, result, [n, c, s](const tape_node& node) {
      const auto& g = node.output->grad;
      std::vector<real> dx(n * c * s);
      const real inv = real(1) / static_cast<real>(s);
      for (std::size_t i = 0; i < n * c; ++i)
        for (std::size_t k = 0; k < s; ++k) dx[i * s + k] = g[i] * inv;
      accumulate_grad(*node.inputs[0], dx);
    });
  }
  return result;
}

tensor max_pool2d(const tensor& x, int kernel, int stride) {
  require_rank(x, 4, "max_pool2d");
  if (kernel < 1 || stride < 1) throw contract_error("max_pool2d: kernel and stride must be >= 1");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t k = static_cast<std::size_t>(kernel), s = static_cast<std::size_t>(stride);
  if (k > h || k > w) {
    throw dimension_error("max_pool2d: kernel " + std::to_string(k) + " larger than input " +
                          shape_str(x.shape()));
  }
  const std::size_t ho = (h - k) / s + 1, wo = (w - k) / s + 1;
  const auto xd = x.data();
  std::vector<real> out(n * c * ho * wo);
  std::vector<std::uint32_t> argmax(out.size());
  const auto* replay = replayed_selection(out.size(), "max_pool2d");
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const real* src = xd.data() + plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t o = (plane * ho + oy) * wo + ox;
        std::size_t best = (oy * s) * w + ox * s;
        if (replay) {
          best = (*replay)[o];
        } else {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::size_t idx = (oy * s + ky) * w + ox * s + kx;
              if (src[idx] > src[best]) best = idx;
            }
          }
        }
        out[o] = src[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  if (!replay) note_selection(argmax);
  tensor result({n, c, ho, wo}, std::move(out));
  if (should_record({&x})) {
    record("max_pool2d", {x.impl()}, result,
           [argmax = std::move(argmax), h, w, ho, wo](const tape_node& node) {
             const auto& g = node.output->grad;
             std::vector<real> dx(node.inputs[0]->data.size(), real(0));
             const std::size_t out_plane = ho * wo;
             for (std::size_t o = 0; o < g.size(); ++o) {
               const std::size_t plane = o / out_plane;
               dx[plane * h * w + argmax[o]] += g[o];
             }
             accumulate_grad(*node.inputs[0], dx);
           });
  }
  return result;
}

tensor l2_normalize(const tensor& x) {
  require_rank(x, 2, "l2_normalize");
  const std::size_t n = x.dim(0), d = x.dim(1);
  const auto xd = x.data();
  std::vector<real> out(n * d);
  std::vector<real> norms(n);
  std::vector<bool> clamped(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += static_cast<double>(xd[i * d + j]) * xd[i * d + j];
    double norm = std::sqrt(sq);
    if (norm < l2_epsilon) {
      norm = l2_epsilon;
      clamped[i] = true;
      note_near_zero_norm();
    }
    norms[i] = static_cast<real>(norm);
    for (std::size_t j = 0; j < d; ++j)
      out[i * d + j] = static_cast<real>(static_cast<double>(xd[i * d + j]) / norm);
  }
  tensor result({n, d}, std::move(out));
  if (should_record({&x})) {
    record("l2_normalize", {x.impl()}, result,
           [norms = std::move(norms), clamped = std::move(clamped), n, d](const tape_node& node) {
             const auto& y = node.output->data;
             const auto& g = node.output->grad;
             std::vector<real> dx(n * d);
             for (std::size_t i = 0; i < n; ++i) {
               const real inv = real(1) / norms[i];
               if (clamped[i]) {
                 for (std::size_t j = 0; j < d; ++j) dx[i * d + j] = g[i * d + j] * inv;
                 continue;
               }
               double dot = 0.0;
               for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(y[i * d + j]) * g[i * d + j];
               const real dotf = static_cast<real>(dot);
               for (std::size_t j = 0; j < d; ++j) dx[i * d + j] = (g[i * d + j] - y[i * d + j] * dotf) * inv;
             }
             accumulate_grad(*node.inputs[0], dx);
           });
  }
  return result;
}

tensor stop_gradient(const tensor& x) {
  return tensor(x.shape(), std::vector<real>(x.data().begin(), x.data().end()), false);
}

tensor add(const tensor& a, const tensor& b) {
  require_same_shape(a, b, "add");
  const auto ad = a.data(), bd = b.data();
  std::vector<real> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = ad[i] + bd[i];
  tensor result(a.shape(), std::move(out));
  if (should_record({&a, &b})) {
    record("add", {a.impl(), b.impl()}, result, [](const tape_node& node) {
      const auto& g = node.output->grad;
      for (int i = 0; i < 2; ++i)
        if (node.inputs[i]->requires_grad) accumulate_grad(*node.inputs[i], g);
    });
  }
  return result;
}

tensor mul(const tensor& a, const tensor& b) {
  require_same_shape(a, b, "mul");
  const auto ad = a.data(), bd = b.data();
  std::vector<real> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = ad[i] * bd[i];
  tensor result(a.shape(), std::move(out));
  if (should_record({&a, &b})) {
    record("mul", {a.impl(), b.impl()}, result, [](const tape_node& node) {
      const auto& g = node.output->grad;
      for (int i = 0; i < 2; ++i) {
        if (!node.inputs[i]->requires_grad) continue;
        const auto& other = node.inputs[1 - i]->data;
        std::vector<real> d(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) d[k] = g[k] * other[k];
        accumulate_grad(*node.inputs[i], d);
      }
    });
  }
  return result;
}

tensor scale(const tensor& x, real factor) {
  const auto xd = x.data();
  std::vector<real> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = xd[i] * factor;
  tensor result(x.shape(), std::move(out));
  if (should_record({&x})) {
    record("scale", {x.impl()}, result, [factor](const tape_node& node) {
      const auto& g = node.output->grad;
      std::vector<real> d(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) d[k] = g[k] * factor;
      accumulate_grad(*node.inputs[0], d);
    });
  }
  return result;
}

tensor sum(const tensor& x) {
  double acc = 0.0;
  for (real v : x.data()) acc += v;
  tensor result = tensor::scalar(static_cast<real>(acc));
  if (should_record({&x})) {
    record("sum", {x.impl()}, result, [](const tape_node& node) {
      std::vector<real> d(node.inputs[0]->data.size(), node.output->grad[0]);
      accumulate_grad(*node.inputs[0], d);
    });
  }
  return result;
}

tensor mean(const tensor& x) {
  double acc = 0.0;
  for (real v : x.data()) acc += v;
  const std::size_t count = x.numel();
  tensor result = tensor::scalar(static_cast<real>(acc / static_cast<double>(count)));
  if (should_record({&x})) {
    record("mean", {x.impl()}, result, [count](const tape_node& node) {
      std::vector<real> d(count, node.output->grad[0] / static_cast<real>(count));
      accumulate_grad(*node.inputs[0], d);
    });
  }
  return result;
}

tensor square(const tensor& x) { return mul(x, x); }

tensor rowwise_dot(const tensor& a, const tensor& b) {
  require_rank(a, 2, "rowwise_dot");
  require_same_shape(a, b, "rowwise_dot");
  const std::size_t n = a.dim(0), d = a.dim(1);
  const auto ad = a.data(), bd = b.data();
  std::vector<real> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += static_cast<double>(ad[i * d + j]) * bd[i * d + j];
    out[i] = static_cast<real>(acc);
  }
  tensor result({n}, std::move(out));
  if (should_record({&a, &b})) {
    record("rowwise_dot", {a.impl(), b.impl()}, result, [n, d](const tape_node& node) {
      const auto& g = node.output->grad;
      for (int side = 0; side < 2; ++side) {
        if (!node.inputs[side]->requires_grad) continue;
        const auto& other = node.inputs[1 - side]->data;
        std::vector<real> dv(n * d);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) dv[i * d + j] = g[i] * other[i * d + j];
        accumulate_grad(*node.inputs[side], dv);
      }
    });
  }
  return result;
}

tensor reshape(const tensor& x, shape_t shape) {
  if (numel_of(shape) != x.numel()) {
    throw dimension_error("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  tensor result(std::move(shape), std::vector<real>(x.data().begin(), x.data().end()));
  if (should_record({&x})) {
    record("reshape", {x.impl()}, result,
           [](const tape_node& node) { accumulate_grad(*node.inputs[0], node.output->grad); });
  }
  return result;
}

tensor bce_with_logits(const tensor& logits, const tensor& targets, const tensor& mask) {
  require_same_shape(logits, targets, "bce_with_logits");
  require_same_shape(logits, mask, "bce_with_logits");
  const auto x = logits.data(), y = targets.data(), m = mask.data();
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (m[i] <= real(0)) continue;
    const double xi = x[i];
    // softplus(x) - y*x, written to avoid overflow for large |x|
    acc += std::max(xi, 0.0) - xi * y[i] + std::log1p(std::exp(-std::abs(xi)));
    ++count;
  }
  if (count == 0) throw contract_error("bce_with_logits: mask selects no cells");
  tensor result = tensor::scalar(static_cast<real>(acc / static_cast<double>(count)));
  if (should_record({&logits})) {
    record("bce_with_logits", {logits.impl(), targets.impl(), mask.impl()}, result,
           [count](const tape_node& node) {
             const auto& x = node.inputs[0]->data;
             const auto& y = node.inputs[1]->data;
             const auto& m = node.inputs[2]->data;
             const real scale_ = node.output->grad[0] / static_cast<real>(count);
             std::vector<real> dx(x.size(), real(0));
             for (std::size_t i = 0; i < x.size(); ++i) {
               if (m[i] <= real(0)) continue;
               const double sig = 1.0 / (1.0 + std::exp(-static_cast<double>(x[i])));
               dx[i] = static_cast<real>(sig - y[i]) * scale_;
             }
             accumulate_grad(*node.inputs[0], dx);
           });
  }
  return result;
}

tensor sigmoid(const tensor& x) {
  const auto xd = x.data();
  std::vector<real> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i)
    out[i] = static_cast<real>(1.0 / (1.0 + std::exp(-static_cast<double>(xd[i]))));
  return tensor(x.shape(), std::move(out));
}

}  // namespace siamgrid::diffcore
