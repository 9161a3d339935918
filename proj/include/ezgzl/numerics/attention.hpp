#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "ezgzl/numerics/tensor.hpp"

namespace ezgzl {

/// Softmax probabilities kept from the forward pass, one [Q x K] block per head
/// stacked vertically ([heads*Q x K]).
struct AttentionCache {
  Tensor2 probs;
};

struct AttentionGrads {
  Tensor2 queries;
  Tensor2 keys;
  Tensor2 values;
};

namespace detail {

inline void check_attention_shapes(const Tensor2& queries, const Tensor2& keys, const Tensor2& values,
                                   std::size_t heads) {
  const std::size_t d = queries.cols();
  if (heads == 0 || d % heads != 0) throw DimensionError("attention: model dim not divisible by heads");
  if (keys.rows() == 0) throw DimensionError("attention: no keys");
  if (keys.cols() != d || values.cols() != d || values.rows() != keys.rows())
    throw DimensionError("attention: queries " + queries.shape_string() + ", keys " + keys.shape_string() +
                         ", values " + values.shape_string());
}

}  // namespace detail

/// Multi-head scaled dot-product attention without input or output projections.
/// Head h uses columns [h*dh, (h+1)*dh) of queries, keys and values, scaled by 1/sqrt(dh).
inline Tensor2 attention_forward(const Tensor2& queries, const Tensor2& keys, const Tensor2& values,
                                 std::size_t heads, AttentionCache* cache = nullptr) {
  detail::check_attention_shapes(queries, keys, values, heads);
  const std::size_t nq = queries.rows();
  const std::size_t nk = keys.rows();
  const std::size_t dh = queries.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor2 out(nq, queries.cols());
  Tensor2 probs(heads * nq, nk);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < nq; ++i) {
      auto p = probs.row(h * nq + i);
      double mx = -INFINITY;
      for (std::size_t j = 0; j < nk; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += queries(i, off + c) * keys(j, off + c);
        p[j] = s * scale;
        mx = std::max(mx, p[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < nk; ++j) {
        p[j] = std::exp(p[j] - mx);
        z += p[j];
      }
      for (std::size_t j = 0; j < nk; ++j) p[j] /= z;
      for (std::size_t j = 0; j < nk; ++j)
        for (std::size_t c = 0; c < dh; ++c) out(i, off + c) += p[j] * values(j, off + c);
    }
  }
  if (cache != nullptr) cache->probs = std::move(probs);
  return out;
}

/// Gradients of attention_forward with respect to its three inputs.
inline AttentionGrads attention_backward(const Tensor2& queries, const Tensor2& keys, const Tensor2& values,
                                         std::size_t heads, const AttentionCache& cache,
                                         const Tensor2& grad_out) {
  detail::check_attention_shapes(queries, keys, values, heads);
  require_same_shape(grad_out, queries, "attention_backward");
  const std::size_t nq = queries.rows();
  const std::size_t nk = keys.rows();
  const std::size_t dh = queries.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (cache.probs.rows() != heads * nq || cache.probs.cols() != nk)
    throw DimensionError("attention_backward: cache does not match inputs");

  AttentionGrads g{Tensor2(nq, queries.cols()), Tensor2(nk, keys.cols()), Tensor2(nk, values.cols())};
  std::vector<double> dp(nk);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < nq; ++i) {
      auto p = cache.probs.row(h * nq + i);
      double weighted = 0.0;
      for (std::size_t j = 0; j < nk; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += grad_out(i, off + c) * values(j, off + c);
          g.values(j, off + c) += p[j] * grad_out(i, off + c);
        }
        dp[j] = s;
        weighted += s * p[j];
      }
      for (std::size_t j = 0; j < nk; ++j) {
        const double ds = p[j] * (dp[j] - weighted) * scale;
        if (ds == 0.0) continue;
        for (std::size_t c = 0; c < dh; ++c) {
          g.queries(i, off + c) += ds * keys(j, off + c);
          g.keys(j, off + c) += ds * queries(i, off + c);
        }
      }
    }
  }
  return g;
}

}  // namespace ezgzl
