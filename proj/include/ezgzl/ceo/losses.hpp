#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "ezgzl/ceo/distance.hpp"
#include "ezgzl/numerics/rng.hpp"
#include "ezgzl/numerics/tensor.hpp"

namespace ezgzl::ceo {

/// Loss value, its (sub)gradient with respect to the optimized embeddings, and
/// the number of pairs whose gradient was dropped because they sat at a kink.
struct LossResult {
  double value = 0.0;
  Tensor2 grad;
  std::size_t degenerate_pairs = 0;
};

/// Anchor c with two distinct other classes i and j.
struct Triplet {
  std::uint32_t anchor;
  std::uint32_t first;
  std::uint32_t second;
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

inline std::uint64_t triplet_count(std::size_t classes) {
  if (classes < 3) return 0;
  const std::uint64_t c = classes;
  return c * (c - 1) * (c - 2);
}

/// Maps an index in [0, C(C-1)(C-2)) to its triplet, in lexicographic order.
inline Triplet triplet_at(std::uint64_t index, std::size_t classes) {
  const std::uint64_t per_anchor = static_cast<std::uint64_t>(classes - 1) * (classes - 2);
  const auto c = static_cast<std::uint32_t>(index / per_anchor);
  const std::uint64_t rem = index % per_anchor;
  auto i = static_cast<std::uint32_t>(rem / (classes - 2));
  auto j = static_cast<std::uint32_t>(rem % (classes - 2));
  if (i >= c) ++i;
  // j skips both c and i, smaller one first.
  const std::uint32_t lo = std::min(c, i), hi = std::max(c, i);
  if (j >= lo) ++j;
  if (j >= hi) ++j;
  return {c, i, j};
}

inline std::vector<Triplet> all_triplets(std::size_t classes) {
  std::vector<Triplet> out;
  out.reserve(triplet_count(classes));
  for (std::uint32_t c = 0; c < classes; ++c)
    for (std::uint32_t i = 0; i < classes; ++i)
      for (std::uint32_t j = 0; j < classes; ++j)
        if (c != i && i != j && c != j) out.push_back({c, i, j});
  return out;
}

/// Uniform sample of `budget` distinct triplets (Floyd's algorithm), returned in
/// lexicographic order. Falls back to full enumeration when budget covers all.
inline std::vector<Triplet> sample_triplets(std::size_t classes, std::uint64_t budget, Rng& rng) {
  const std::uint64_t total = triplet_count(classes);
  if (budget >= total) return all_triplets(classes);
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(budget * 2);
  for (std::uint64_t j = total - budget; j < total; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> idx(chosen.begin(), chosen.end());
  std::sort(idx.begin(), idx.end());
  std::vector<Triplet> out;
  out.reserve(idx.size());
  for (auto k : idx) out.push_back(triplet_at(k, classes));
  return out;
}

namespace detail {

inline void require_unit_classes(const Tensor2& w, const char* what) {
  if (w.rows() < 2) throw DimensionError(std::string(what) + ": need at least 2 classes");
}

}  // namespace detail

/// Negative sum over classes of the distance to the nearest other class.
/// Nearest-neighbour ties resolve to the smallest class index.
inline LossResult loss_separability(const Tensor2& w, DistanceMetric metric, double zero_dist_epsilon = 1e-9) {
  detail::require_unit_classes(w, "loss_separability");
  const std::size_t c = w.rows();
  const Tensor2 dist = pairwise_distances(w, metric);
  LossResult r{0.0, Tensor2(c, w.cols()), 0};
  for (std::size_t a = 0; a < c; ++a) {
    std::size_t nn = a == 0 ? 1 : 0;
    for (std::size_t k = 0; k < c; ++k)
      if (k != a && dist(a, k) < dist(a, nn)) nn = k;
    const double d = dist(a, nn);
    r.value -= d;
    const bool ok_a = accumulate_distance_grad(w.row(a), w.row(nn), d, metric, -1.0, zero_dist_epsilon, r.grad.row(a));
    if (!ok_a) {
      ++r.degenerate_pairs;
      continue;
    }
    accumulate_distance_grad(w.row(nn), w.row(a), d, metric, -1.0, zero_dist_epsilon, r.grad.row(nn));
  }
  return r;
}

/// Sum over classes of ||w_c - t_c||_2; zero subgradient at the kink.
inline LossResult loss_semantic_proximity(const Tensor2& w, const Tensor2& t, double zero_dist_epsilon = 1e-9) {
  require_same_shape(w, t, "loss_semantic_proximity");
  LossResult r{0.0, Tensor2(w.rows(), w.cols()), 0};
  for (std::size_t c = 0; c < w.rows(); ++c) {
    const double d = distance(w.row(c), t.row(c), DistanceMetric::euclidean);
    r.value += d;
    if (!accumulate_distance_grad(w.row(c), t.row(c), d, DistanceMetric::euclidean, 1.0, zero_dist_epsilon,
                                  r.grad.row(c)))
      ++r.degenerate_pairs;
  }
  return r;
}

struct RankLossOptions {
  double margin = 1.0;
  DistanceMetric metric = DistanceMetric::cosine;
  double tie_epsilon = 1e-9;
  double zero_dist_epsilon = 1e-9;
};

/// Margin ranking loss from precomputed reference distances `ref_dist` ([C x C]).
/// Sums max{0, m - sign(dt_ci - dt_cj) (dw_ci - dw_cj)} over `triplets`, scaled by
/// `scale`. Triplets whose reference distances tie within tie_epsilon are skipped.
inline LossResult loss_semantic_rank_from(const Tensor2& w, const Tensor2& ref_dist, std::span<const Triplet> triplets,
                                          const RankLossOptions& opt, double scale = 1.0) {
  const std::size_t c = w.rows();
  if (ref_dist.rows() != c || ref_dist.cols() != c) throw DimensionError("loss_semantic_rank: reference distances");
  const Tensor2 dist = pairwise_distances(w, opt.metric);
  LossResult r{0.0, Tensor2(c, w.cols()), 0};
  for (const Triplet& tr : triplets) {
    const std::size_t a = tr.anchor, i = tr.first, j = tr.second;
    if (a >= c || i >= c || j >= c) throw ValidationError("loss_semantic_rank: triplet index out of range");
    if (a == i || i == j || a == j) throw ValidationError("loss_semantic_rank: triplet indices must be distinct");
    const double dt = ref_dist(a, i) - ref_dist(a, j);
    if (std::abs(dt) < opt.tie_epsilon) continue;
    const double s = dt > 0.0 ? 1.0 : -1.0;
    const double term = opt.margin - s * (dist(a, i) - dist(a, j));
    if (term <= 0.0) continue;
    r.value += scale * term;
    // d term / d w = -s (d dw_ai - d dw_aj)
    const double k = -s * scale;
    if (accumulate_distance_grad(w.row(a), w.row(i), dist(a, i), opt.metric, k, opt.zero_dist_epsilon, r.grad.row(a)))
      accumulate_distance_grad(w.row(i), w.row(a), dist(a, i), opt.metric, k, opt.zero_dist_epsilon, r.grad.row(i));
    else
      ++r.degenerate_pairs;
    if (accumulate_distance_grad(w.row(a), w.row(j), dist(a, j), opt.metric, -k, opt.zero_dist_epsilon, r.grad.row(a)))
      accumulate_distance_grad(w.row(j), w.row(a), dist(a, j), opt.metric, -k, opt.zero_dist_epsilon, r.grad.row(j));
    else
      ++r.degenerate_pairs;
  }
  return r;
}

/// Margin ranking loss between the distance orderings of `t` and `w`. With no
/// triplet list every ordered triple of distinct classes is used.
inline LossResult loss_semantic_rank(const Tensor2& w, const Tensor2& t, const RankLossOptions& opt,
                                     std::optional<std::span<const Triplet>> triplets = std::nullopt) {
  require_same_shape(w, t, "loss_semantic_rank");
  detail::require_unit_classes(w, "loss_semantic_rank");
  const Tensor2 ref = pairwise_distances(t, opt.metric);
  if (triplets) return loss_semantic_rank_from(w, ref, *triplets, opt);
  const auto all = all_triplets(w.rows());
  return loss_semantic_rank_from(w, ref, all, opt);
}

}  // namespace ezgzl::ceo
