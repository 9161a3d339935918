#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ezgzl/numerics/tensor.hpp"

namespace ezgzl::avla {

struct ContrastiveResult {
  double loss = 0.0;
  Tensor2 grad;     // d loss / d scores
  Tensor2 softmax;  // row-wise softmax over the included columns, 0 elsewhere
};

/// Columns of row i that enter the denominator. Without dedup that is every
/// column; with dedup a column k != i is dropped when its label equals the row's
/// own label or an earlier column's label.
inline std::vector<char> contrastive_columns(std::span<const std::size_t> targets, std::size_t i, bool dedup) {
  const std::size_t b = targets.size();
  std::vector<char> keep(b, 1);
  if (!dedup) return keep;
  for (std::size_t k = 0; k < b; ++k) {
    if (k == i) continue;
    if (targets[k] == targets[i]) {
      keep[k] = 0;
      continue;
    }
    for (std::size_t j = 0; j < k; ++j)
      if (keep[j] && targets[j] == targets[k] && j != i) {
        keep[k] = 0;
        break;
      }
  }
  return keep;
}

/// -log softmax(row)[positive] over the kept columns, with max subtraction.
/// Writes the softmax into `probs` (0 for dropped columns).
inline double contrastive_row(std::span<const double> row, std::size_t positive, std::span<const char> keep,
                              std::span<double> probs) {
  std::size_t top = positive;
  for (std::size_t k = 0; k < row.size(); ++k)
    if (keep[k] && row[k] > row[top]) top = k;
  const double mx = row[top];
  // The max term is exactly 1; summing the rest separately keeps log1p accurate
  // when one class dominates.
  double rest = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    probs[k] = keep[k] ? std::exp(row[k] - mx) : 0.0;
    if (k != top) rest += probs[k];
  }
  const double z = 1.0 + rest;
  for (double& p : probs) p /= z;
  return std::log1p(rest) + (mx - row[positive]);
}

/// Mean over rows i of -log(exp(s_ii) / sum_k exp(s_ik)); scores[i][k] is the
/// similarity of sample i to the class of batch entry k.
inline ContrastiveResult contrastive_loss(const Tensor2& scores, std::span<const std::size_t> targets,
                                          bool dedup = false) {
  const std::size_t b = scores.rows();
  if (b == 0 || scores.cols() != b) throw DimensionError("contrastive_loss: scores must be B x B, got " + scores.shape_string());
  if (targets.size() != b) throw DimensionError("contrastive_loss: targets length != B");
  if (!scores.all_finite()) throw NumericalError("contrastive_loss: non-finite scores");
  ContrastiveResult r{0.0, Tensor2(b, b), Tensor2(b, b)};
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto keep = contrastive_columns(targets, i, dedup);
    r.loss += contrastive_row(scores.row(i), i, keep, r.softmax.row(i));
    for (std::size_t k = 0; k < b; ++k) r.grad(i, k) = (r.softmax(i, k) - (k == i ? 1.0 : 0.0)) * inv_b;
  }
  r.loss *= inv_b;
  return r;
}

}  // namespace ezgzl::avla
