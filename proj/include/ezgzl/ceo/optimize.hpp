#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ezgzl/ceo/distance.hpp"
#include "ezgzl/ceo/losses.hpp"
#include "ezgzl/numerics/rng.hpp"
#include "ezgzl/numerics/sphere.hpp"

namespace ezgzl::ceo {

enum class SemanticLoss : std::uint8_t { proximity = 0, rank = 1 };

/// How the ranking term enters the joint objective.
///   class_mean: C times the mean over triplets, so both terms scale with the
///               class count and alpha is a balance between comparable sums.
///   sum:        the raw sum over all ordered triplets.
enum class RankReduction : std::uint8_t { class_mean = 0, sum = 1 };

inline std::string_view to_string(SemanticLoss s) { return s == SemanticLoss::rank ? "rank" : "proximity"; }
inline std::string_view to_string(RankReduction r) { return r == RankReduction::sum ? "sum" : "class_mean"; }

inline std::optional<SemanticLoss> parse_semantic_loss(std::string_view s) {
  if (s == "rank") return SemanticLoss::rank;
  if (s == "proximity" || s == "prox") return SemanticLoss::proximity;
  return std::nullopt;
}

inline std::optional<RankReduction> parse_rank_reduction(std::string_view s) {
  if (s == "class_mean") return RankReduction::class_mean;
  if (s == "sum") return RankReduction::sum;
  return std::nullopt;
}

/// Full enumeration up to this many classes; sampled triplets above it.
inline constexpr std::size_t kFullEnumerationMaxClasses = 64;
inline constexpr std::uint64_t kDefaultTripletBudget = 50'000;

struct CeoConfig {
  double alpha = 0.5;
  double margin = 1.0;
  SemanticLoss sem_loss = SemanticLoss::rank;
  DistanceMetric metric = DistanceMetric::cosine;
  RankReduction rank_reduction = RankReduction::class_mean;
  std::size_t steps = 2000;
  double lr = 0.02;
  /// Triplets per step; unset picks full enumeration for C <= 64, else 50,000.
  std::optional<std::uint64_t> triplet_budget;
  double tie_epsilon = 1e-9;
  double zero_dist_epsilon = 1e-9;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
    if (!(margin >= 0.0)) throw ValidationError("margin must be >= 0");
    if (steps < 1) throw ValidationError("steps must be >= 1");
    if (!(lr > 0.0)) throw ValidationError("lr must be > 0");
    if (triplet_budget && *triplet_budget == 0) throw ValidationError("triplet_budget must be >= 1");
    if (!(tie_epsilon >= 0.0) || !(zero_dist_epsilon >= 0.0)) throw ValidationError("epsilons must be >= 0");
  }

  std::uint64_t effective_triplet_budget(std::size_t classes) const {
    if (triplet_budget) return *triplet_budget;
    return classes <= kFullEnumerationMaxClasses ? triplet_count(classes) : kDefaultTripletBudget;
  }
};

struct JointLoss {
  double value = 0.0;
  double semantic = 0.0;
  double separability = 0.0;
  Tensor2 grad;
  std::size_t degenerate_pairs = 0;
};

/// Precomputed per-run state for the joint objective: reference distances of the
/// initial embeddings and the triplet set when it is fixed.
class JointObjective {
 public:
  JointObjective(const Tensor2& initial, const CeoConfig& config) : initial_(initial), config_(config) {
    config_.validate();
    if (initial.rows() < 2) throw DimensionError("class embedding optimization needs at least 2 classes");
    if (config_.sem_loss == SemanticLoss::rank) {
      ref_dist_ = pairwise_distances(initial, config_.metric);
      budget_ = config_.effective_triplet_budget(initial.rows());
      if (budget_ >= triplet_count(initial.rows())) full_ = all_triplets(initial.rows());
    }
  }

  /// Evaluates (1 - alpha) L_sem + alpha L_sep and its gradient at `w`. The rng is
  /// drawn from only when triplets are sampled.
  JointLoss operator()(const Tensor2& w, Rng& rng) const {
    require_same_shape(w, initial_, "joint_objective");
    const double alpha = config_.alpha;
    JointLoss out{0.0, 0.0, 0.0, Tensor2(w.rows(), w.cols()), 0};

    if (alpha > 0.0) {
      LossResult sep = loss_separability(w, config_.metric, config_.zero_dist_epsilon);
      out.separability = sep.value;
      out.degenerate_pairs += sep.degenerate_pairs;
      axpy(alpha, sep.grad, out.grad);
    }
    if (alpha < 1.0) {
      LossResult sem;
      if (config_.sem_loss == SemanticLoss::proximity) {
        sem = loss_semantic_proximity(w, initial_, config_.zero_dist_epsilon);
      } else {
        RankLossOptions opt{config_.margin, config_.metric, config_.tie_epsilon, config_.zero_dist_epsilon};
        std::vector<Triplet> sampled;
        std::span<const Triplet> trips = full_;
        if (full_.empty()) {
          sampled = sample_triplets(w.rows(), budget_, rng);
          trips = sampled;
        }
        sem = loss_semantic_rank_from(w, ref_dist_, trips, opt, rank_scale(trips.size()));
      }
      out.semantic = sem.value;
      out.degenerate_pairs += sem.degenerate_pairs;
      axpy(1.0 - alpha, sem.grad, out.grad);
    }
    out.value = (1.0 - alpha) * out.semantic + alpha * out.separability;
    return out;
  }

  /// Multiplier applied to the raw triplet sum.
  double rank_scale(std::size_t used) const {
    const double total = static_cast<double>(triplet_count(initial_.rows()));
    if (used == 0) return 0.0;
    if (config_.rank_reduction == RankReduction::class_mean)
      return static_cast<double>(initial_.rows()) / static_cast<double>(used);
    // Sampled sums are rescaled to estimate the full sum.
    return total / static_cast<double>(used);
  }

  const CeoConfig& config() const { return config_; }

 private:
  Tensor2 initial_;
  CeoConfig config_;
  Tensor2 ref_dist_;
  std::uint64_t budget_ = 0;
  std::vector<Triplet> full_;
};

inline JointLoss joint_objective(const Tensor2& w, const Tensor2& t, const CeoConfig& config, Rng& rng) {
  return JointObjective(t, config)(w, rng);
}

struct LossTraceEntry {
  double semantic;
  double separability;
  double joint;
};

struct CeoResult {
  Tensor2 optimized;
  std::vector<LossTraceEntry> loss_trace;
  double min_pairwise_distance_before = 0.0;
  double min_pairwise_distance_after = 0.0;
  double kendall_tau = 0.0;
  std::size_t degenerate_pair_events = 0;
  /// Set when a non-finite loss stopped the run early; `optimized` is then the
  /// last finite iterate.
  std::optional<std::string> abort_reason;
};

/// Kendall tau-b between two equally long sequences.
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("kendall_tau: length mismatch");
  double concordant = 0.0, discordant = 0.0, ties_x = 0.0, ties_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ties_x += 1.0;
      } else if (dy == 0.0) {
        ties_y += 1.0;
      } else if ((dx > 0.0) == (dy > 0.0)) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  const double denom = std::sqrt((concordant + discordant + ties_x) * (concordant + discordant + ties_y));
  return denom > 0.0 ? (concordant - discordant) / denom : 0.0;
}

inline std::vector<double> upper_triangle(const Tensor2& m) {
  std::vector<double> out;
  out.reserve(m.rows() * (m.rows() - 1) / 2);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

/// Called with (step index, iterate after projection).
using IterateObserver = std::function<void(std::size_t, const Tensor2&)>;

/// Projected gradient descent on the joint objective from w = t; every row is
/// renormalized after each step.
inline CeoResult optimize_class_embeddings(const Tensor2& initial, const CeoConfig& config,
                                           const IterateObserver& observer = {}) {
  JointObjective objective(initial, config);
  Rng rng(config.seed);
  CeoResult result;
  result.loss_trace.reserve(config.steps);
  Tensor2 w = initial;
  for (std::size_t step = 0; step < config.steps; ++step) {
    JointLoss loss = objective(w, rng);
    if (!std::isfinite(loss.value) || !loss.grad.all_finite()) {
      result.abort_reason = "non-finite loss at step " + std::to_string(step);
      break;
    }
    result.loss_trace.push_back({loss.semantic, loss.separability, loss.value});
    result.degenerate_pair_events += loss.degenerate_pairs;
    Tensor2 next = w;
    axpy(-config.lr, loss.grad, next);
    project_rows_to_sphere(next);
    if (!next.all_finite()) {
      result.abort_reason = "non-finite iterate at step " + std::to_string(step);
      break;
    }
    w = std::move(next);
    if (observer) observer(step, w);
  }

  const Tensor2 before = pairwise_distances(initial, config.metric);
  const Tensor2 after = pairwise_distances(w, config.metric);
  result.min_pairwise_distance_before = min_pairwise_distance(before);
  result.min_pairwise_distance_after = min_pairwise_distance(after);
  result.kendall_tau = kendall_tau(upper_triangle(before), upper_triangle(after));
  result.optimized = std::move(w);
  return result;
}

}  // namespace ezgzl::ceo
