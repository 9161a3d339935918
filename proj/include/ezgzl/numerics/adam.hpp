#pragma once

#include <cmath>
#include <cstdint>

#include "ezgzl/numerics/tensor.hpp"

namespace ezgzl {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Optimizer state for one parameter tensor.
struct AdamState {
  std::uint64_t step = 0;
  Tensor2 first_moment;
  Tensor2 second_moment;
  AdamHyper hyper;

  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, AdamHyper h)
      : first_moment(rows, cols), second_moment(rows, cols), hyper(h) {
    if (!(h.lr > 0.0)) throw ValidationError("adam: lr must be > 0");
    if (h.beta1 < 0.0 || h.beta1 >= 1.0 || h.beta2 < 0.0 || h.beta2 >= 1.0)
      throw ValidationError("adam: betas must lie in [0, 1)");
    if (h.eps < 0.0 || h.weight_decay < 0.0) throw ValidationError("adam: eps and weight_decay must be >= 0");
  }
};

/// One Adam update with bias correction. Weight decay is decoupled and applied to
/// the parameters before the moment update.
inline void adam_step(Tensor2& params, const Tensor2& grads, AdamState& state) {
  require_same_shape(params, grads, "adam_step");
  require_same_shape(params, state.first_moment, "adam_step state");
  const AdamHyper& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);

  auto p = params.data();
  auto g = grads.data();
  auto m = state.first_moment.data();
  auto v = state.second_moment.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (h.weight_decay != 0.0) p[i] -= h.lr * h.weight_decay * p[i];
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
}

}  // namespace ezgzl
