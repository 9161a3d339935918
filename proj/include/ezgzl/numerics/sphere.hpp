#pragma once

#include <span>
#include <vector>

#include "ezgzl/numerics/tensor.hpp"

namespace ezgzl {

inline std::vector<double> project_to_sphere(std::span<const double> v) {
  const double n = norm2(v);
  if (!(n > 0.0)) throw ValidationError("project_to_sphere: zero-norm vector");
  if (!std::isfinite(n)) throw NumericalError("project_to_sphere: non-finite norm");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

/// Rescales every row of `m` to unit l2 norm in place.
inline void project_rows_to_sphere(Tensor2& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const double n = norm2(row);
    if (!(n > 0.0)) throw ValidationError("project_to_sphere: zero-norm row " + std::to_string(r));
    for (double& x : row) x /= n;
  }
}

inline double max_row_norm_deviation(const Tensor2& m) {
  double dev = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) dev = std::max(dev, std::abs(norm2(m.row(r)) - 1.0));
  return dev;
}

}  // namespace ezgzl
