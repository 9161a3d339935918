#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "ezgzl/numerics/rng.hpp"
#include "ezgzl/numerics/tensor.hpp"

namespace ezgzl::avla {

/// y = x W^T + b for row-batched x. weight is [out x in], bias is [1 x out].
struct Linear {
  Tensor2 weight;
  Tensor2 bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out) : weight(out, in), bias(1, out) {}

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  /// Glorot-uniform weights, zero bias.
  static Linear glorot(std::size_t in, std::size_t out, Rng& rng) {
    Linear l(in, out);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : l.weight.data()) w = rng.uniform(-limit, limit);
    return l;
  }

  Tensor2 forward(const Tensor2& x) const {
    Tensor2 y = matmul_nt(x, weight);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto row = y.row(r);
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias(0, j);
    }
    return y;
  }

  /// Accumulates parameter gradients into `grad` and returns dL/dx.
  Tensor2 backward(const Tensor2& x, const Tensor2& dy, Linear& grad) const {
    matmul_tn_accumulate(dy, x, grad.weight);
    for (std::size_t r = 0; r < dy.rows(); ++r)
      for (std::size_t j = 0; j < dy.cols(); ++j) grad.bias(0, j) += dy(r, j);
    return matmul(dy, weight);
  }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f(self.weight);
    f(self.bias);
  }
};

struct LayerNormCache {
  Tensor2 normalized;
  std::vector<double> inv_std;
};

/// Per-row layer normalization with learned scale and offset.
struct LayerNorm {
  Tensor2 gamma;
  Tensor2 beta;
  static constexpr double kEps = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim) : gamma(1, dim, 1.0), beta(1, dim) {}

  Tensor2 forward(const Tensor2& x, LayerNormCache* cache = nullptr) const {
    const std::size_t d = x.cols();
    Tensor2 y(x.rows(), d);
    Tensor2 xhat(x.rows(), d);
    std::vector<double> inv(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto row = x.row(r);
      double mean = 0.0;
      for (double v : row) mean += v;
      mean /= static_cast<double>(d);
      double var = 0.0;
      for (double v : row) var += (v - mean) * (v - mean);
      var /= static_cast<double>(d);
      inv[r] = 1.0 / std::sqrt(var + kEps);
      for (std::size_t j = 0; j < d; ++j) {
        xhat(r, j) = (row[j] - mean) * inv[r];
        y(r, j) = gamma(0, j) * xhat(r, j) + beta(0, j);
      }
    }
    if (cache) *cache = {std::move(xhat), std::move(inv)};
    return y;
  }

  Tensor2 backward(const LayerNormCache& cache, const Tensor2& dy, LayerNorm& grad) const {
    const std::size_t d = dy.cols();
    Tensor2 dx(dy.rows(), d);
    std::vector<double> dxhat(d);
    for (std::size_t r = 0; r < dy.rows(); ++r) {
      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        grad.gamma(0, j) += dy(r, j) * cache.normalized(r, j);
        grad.beta(0, j) += dy(r, j);
        dxhat[j] = dy(r, j) * gamma(0, j);
        mean_dxhat += dxhat[j];
        mean_dxhat_xhat += dxhat[j] * cache.normalized(r, j);
      }
      mean_dxhat /= static_cast<double>(d);
      mean_dxhat_xhat /= static_cast<double>(d);
      for (std::size_t j = 0; j < d; ++j)
        dx(r, j) = cache.inv_std[r] * (dxhat[j] - mean_dxhat - cache.normalized(r, j) * mean_dxhat_xhat);
    }
    return dx;
  }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f(self.gamma);
    f(self.beta);
  }
};

/// GELU, tanh approximation.
inline double gelu(double x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

inline double gelu_grad(double x) {
  constexpr double c = 0.7978845608028654;
  const double t = std::tanh(c * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x);
}

inline Tensor2 apply(const Tensor2& x, double (*fn)(double)) {
  Tensor2 y = x;
  for (double& v : y.data()) v = fn(v);
  return y;
}

/// dy * f'(x), elementwise.
inline Tensor2 apply_grad(const Tensor2& x, const Tensor2& dy, double (*fn_grad)(double)) {
  Tensor2 dx = dy;
  auto xs = x.data();
  auto d = dx.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= fn_grad(xs[i]);
  return dx;
}

inline double tanh_fn(double x) { return std::tanh(x); }
inline double tanh_grad(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

// Generic parameter traversal over any type exposing static visit(self, f).

template <typename M>
std::size_t param_count(const M& m) {
  std::size_t n = 0;
  M::visit(m, [&](const Tensor2& t) { n += t.size(); });
  return n;
}

template <typename M>
std::vector<double> flatten_params(const M& m) {
  std::vector<double> out;
  out.reserve(param_count(m));
  M::visit(m, [&](const Tensor2& t) { out.insert(out.end(), t.data().begin(), t.data().end()); });
  return out;
}

template <typename M>
void assign_params(M& m, std::span<const double> flat) {
  if (flat.size() != param_count(m)) throw DimensionError("assign_params: parameter count mismatch");
  std::size_t pos = 0;
  M::visit(m, [&](Tensor2& t) {
    for (double& x : t.data()) x = flat[pos++];
  });
}

/// Sets every parameter of `m` to zero, keeping shapes.
template <typename M>
void zero_params(M& m) {
  M::visit(m, [](Tensor2& t) { t.fill(0.0); });
}

/// a += b, parameter by parameter in visit order.
template <typename M>
void accumulate_params(M& a, const M& b) {
  std::vector<const Tensor2*> src;
  M::visit(b, [&](const Tensor2& t) { src.push_back(&t); });
  std::size_t i = 0;
  M::visit(a, [&](Tensor2& t) { axpy(1.0, *src[i++], t); });
}

}  // namespace ezgzl::avla
