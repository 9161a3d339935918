#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ezgzl/errors.hpp"

namespace ezgzl {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  double step_size = 0.0;

  bool passes(double tolerance) const { return max_relative_error <= tolerance; }
};

/// Compares `analytic_grad` against central differences of `f` around `point`.
/// The per-coordinate error is |g_fd - g_an| / max(1, |g_fd|, |g_an|).
template <typename F>
GradCheckReport finite_diff_check(F&& f, std::span<const double> analytic_grad, std::span<const double> point,
                                  double step = 1e-5) {
  if (analytic_grad.size() != point.size()) throw DimensionError("finite_diff_check: gradient length mismatch");
  if (!(step > 0.0)) throw ValidationError("finite_diff_check: step must be > 0");

  GradCheckReport report;
  report.step_size = step;
  std::vector<double> x(point.begin(), point.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f(std::span<const double>(x));
    x[i] = orig - step;
    const double fm = f(std::span<const double>(x));
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericalError("finite_diff_check: non-finite value at coordinate " + std::to_string(i));
    const double fd = (fp - fm) / (2.0 * step);
    const double an = analytic_grad[i];
    const double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_coordinate = i;
    }
  }
  return report;
}

}  // namespace ezgzl
