#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "ezgzl/numerics/tensor.hpp"

namespace ezgzl::ceo {

enum class DistanceMetric : std::uint8_t { euclidean = 0, cosine = 1, manhattan = 2 };

inline std::string_view to_string(DistanceMetric m) {
  switch (m) {
    case DistanceMetric::euclidean: return "euclidean";
    case DistanceMetric::cosine: return "cosine";
    case DistanceMetric::manhattan: return "manhattan";
  }
  return "?";
}

inline std::optional<DistanceMetric> parse_metric(std::string_view s) {
  if (s == "euclidean" || s == "l2") return DistanceMetric::euclidean;
  if (s == "cosine") return DistanceMetric::cosine;
  if (s == "manhattan" || s == "l1") return DistanceMetric::manhattan;
  return std::nullopt;
}

/// Euclidean and manhattan distances have a kink at u == v; cosine does not.
inline bool has_kink_at_zero(DistanceMetric m) { return m != DistanceMetric::cosine; }

/// Distance between two rows. Cosine distance is 1 - u.v and assumes unit rows.
inline double distance(std::span<const double> u, std::span<const double> v, DistanceMetric m) {
  if (u.size() != v.size()) throw DimensionError("distance: length mismatch");
  double s = 0.0;
  switch (m) {
    case DistanceMetric::euclidean:
      for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
      return std::sqrt(s);
    case DistanceMetric::cosine:
      return 1.0 - dot(u, v);
    case DistanceMetric::manhattan:
      for (std::size_t i = 0; i < u.size(); ++i) s += std::abs(u[i] - v[i]);
      return s;
  }
  return s;
}

/// Accumulates scale * d(u, v)/du into `out`. `dist` is the precomputed distance.
/// Returns false (and adds nothing) for a degenerate pair at a kink.
inline bool accumulate_distance_grad(std::span<const double> u, std::span<const double> v, double dist,
                                     DistanceMetric m, double scale, double zero_dist_epsilon,
                                     std::span<double> out) {
  switch (m) {
    case DistanceMetric::euclidean:
      if (dist < zero_dist_epsilon) return false;
      for (std::size_t i = 0; i < u.size(); ++i) out[i] += scale * (u[i] - v[i]) / dist;
      return true;
    case DistanceMetric::cosine:
      for (std::size_t i = 0; i < u.size(); ++i) out[i] -= scale * v[i];
      return true;
    case DistanceMetric::manhattan:
      if (dist < zero_dist_epsilon) return false;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double diff = u[i] - v[i];
        out[i] += scale * static_cast<double>((diff > 0.0) - (diff < 0.0));
      }
      return true;
  }
  return false;
}

/// Symmetric [C x C] matrix of pairwise distances between rows.
inline Tensor2 pairwise_distances(const Tensor2& embeddings, DistanceMetric m) {
  const std::size_t c = embeddings.rows();
  if (c < 2) throw DimensionError("pairwise_distances: need at least 2 rows");
  Tensor2 d(c, c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = i + 1; j < c; ++j) {
      // Clamp the rounding residue of 1 - u.u at identical unit rows.
      const double v = std::max(0.0, distance(embeddings.row(i), embeddings.row(j), m));
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

/// Smallest off-diagonal entry of a pairwise distance matrix.
inline double min_pairwise_distance(const Tensor2& dist) {
  double best = INFINITY;
  for (std::size_t i = 0; i < dist.rows(); ++i)
    for (std::size_t j = i + 1; j < dist.cols(); ++j) best = std::min(best, dist(i, j));
  return best;
}

}  // namespace ezgzl::ceo
