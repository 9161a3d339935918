#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "ezgzl/errors.hpp"
#include "ezgzl/numerics/tensor.hpp"

namespace ezgzl::eval {

/// 2SU/(S+U), or 0 when S+U = 0.
inline double harmonic_mean(double seen, double unseen) {
  const double s = seen + unseen;
  return s > 0.0 ? 2.0 * seen * unseen / s : 0.0;
}

inline void check_aligned(std::span<const std::size_t> predictions, std::span<const std::size_t> truths) {
  if (predictions.size() != truths.size())
    throw DimensionError("predictions (" + std::to_string(predictions.size()) + ") and truths (" +
                         std::to_string(truths.size()) + ") differ in length");
}

/// Correct and total sample counts per true class.
struct ClassTally {
  std::vector<std::size_t> correct;
  std::vector<std::size_t> total;
};

inline ClassTally tally(std::span<const std::size_t> predictions, std::span<const std::size_t> truths,
                        std::size_t classes) {
  check_aligned(predictions, truths);
  ClassTally t{std::vector<std::size_t>(classes, 0), std::vector<std::size_t>(classes, 0)};
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] >= classes || predictions[i] >= classes) throw ValidationError("label out of range");
    ++t.total[truths[i]];
    if (predictions[i] == truths[i]) ++t.correct[truths[i]];
  }
  return t;
}

/// Unweighted mean over the classes of `class_subset` that have at least one
/// sample of their per-class accuracy, in percent.
inline double mean_class_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> truths,
                                  std::span<const std::size_t> class_subset) {
  check_aligned(predictions, truths);
  if (class_subset.empty()) throw ValidationError("mean_class_accuracy: empty class subset");
  std::size_t classes = 0;
  for (auto c : class_subset) classes = std::max(classes, c + 1);
  for (auto c : truths) classes = std::max(classes, c + 1);
  for (auto c : predictions) classes = std::max(classes, c + 1);
  const ClassTally t = tally(predictions, truths, classes);
  double sum = 0.0;
  std::size_t used = 0;
  for (auto c : class_subset) {
    if (t.total[c] == 0) continue;
    sum += 100.0 * static_cast<double>(t.correct[c]) / static_cast<double>(t.total[c]);
    ++used;
  }
  if (used == 0) throw ValidationError("mean_class_accuracy: no samples for any class in the subset");
  return sum / static_cast<double>(used);
}

/// Counts indexed (true class, predicted class).
inline Tensor2 confusion_matrix(std::span<const std::size_t> predictions, std::span<const std::size_t> truths,
                                std::size_t classes) {
  check_aligned(predictions, truths);
  Tensor2 m(classes, classes);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] >= classes || predictions[i] >= classes)
      throw ValidationError("confusion_matrix: label out of range (" + std::to_string(truths[i]) + ", " +
                            std::to_string(predictions[i]) + ") for " + std::to_string(classes) + " classes");
    m(truths[i], predictions[i]) += 1.0;
  }
  return m;
}

}  // namespace ezgzl::eval
