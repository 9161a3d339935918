#pragma once

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ezgzl/ceo/distance.hpp"
#include "ezgzl/ceo/optimize.hpp"
#include "ezgzl/store/embedding_bank.hpp"

namespace ezgzl::ceo {

struct NeighborRow {
  std::string base_class;
  std::string nn_initial;
  double distance_initial;
  std::string nn_optimized;
  double distance_optimized;
};

namespace detail {

/// Nearest other row of `dist` for row c; ties go to the smallest index.
inline std::size_t nearest(const Tensor2& dist, std::size_t c) {
  std::size_t nn = c == 0 ? 1 : 0;
  for (std::size_t k = 0; k < dist.cols(); ++k)
    if (k != c && dist(c, k) < dist(c, nn)) nn = k;
  return nn;
}

}  // namespace detail

/// Nearest neighbour of every class before and after optimization, sorted by class name.
inline std::vector<NeighborRow> nearest_neighbor_report(const store::EmbeddingBank& bank, DistanceMetric metric) {
  if (!bank.has_optimized()) throw ValidationError("nearest-neighbour report needs optimized embeddings");
  const Tensor2 before = pairwise_distances(bank.initial(), metric);
  const Tensor2 after = pairwise_distances(*bank.optimized(), metric);
  const auto& names = bank.class_names();
  std::vector<NeighborRow> rows;
  for (std::size_t c = 0; c < bank.size(); ++c) {
    const std::size_t a = detail::nearest(before, c);
    const std::size_t b = detail::nearest(after, c);
    rows.push_back({names[c], names[a], before(c, a), names[b], after(c, b)});
  }
  std::sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.base_class < y.base_class; });
  return rows;
}

inline nlohmann::ordered_json neighbor_report_json(const std::vector<NeighborRow>& rows, DistanceMetric metric) {
  nlohmann::ordered_json j;
  j["metric"] = std::string(to_string(metric));
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json e;
    e["base_class"] = r.base_class;
    e["nn_without_opt"] = r.nn_initial;
    e["d_without_opt"] = r.distance_initial;
    e["nn_with_opt"] = r.nn_optimized;
    e["d_with_opt"] = r.distance_optimized;
    j["rows"].push_back(std::move(e));
  }
  return j;
}

/// Aligned text table: base class | NN (w/o opt) | D (w/o opt) | NN (w opt) | D (w opt).
inline std::string neighbor_report_text(const std::vector<NeighborRow>& rows) {
  const std::vector<std::string> header{"base class", "NN (w/o opt)", "D (w/o opt)", "NN (w opt)", "D (w opt)"};
  auto fmt = [](double d) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << d;
    return os.str();
  };
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : rows)
    cells.push_back({r.base_class, r.nn_initial, fmt(r.distance_initial), r.nn_optimized, fmt(r.distance_optimized)});
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::ostringstream os;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i) os << "  ";
      os << std::left << std::setw(static_cast<int>(width[i])) << cells[r][i];
    }
    os << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      os << std::string(total + 2 * (width.size() - 1), '-') << "\n";
    }
  }
  return os.str();
}

inline nlohmann::ordered_json ceo_trace_json(const CeoConfig& cfg, const CeoResult& r) {
  nlohmann::ordered_json j;
  j["alpha"] = cfg.alpha;
  j["margin"] = cfg.margin;
  j["metric"] = std::string(to_string(cfg.metric));
  j["sem_loss"] = std::string(to_string(cfg.sem_loss));
  j["steps"] = cfg.steps;
  j["lr"] = cfg.lr;
  j["min_pairwise_distance_before"] = r.min_pairwise_distance_before;
  j["min_pairwise_distance_after"] = r.min_pairwise_distance_after;
  j["kendall_tau"] = r.kendall_tau;
  j["degenerate_pair_events"] = r.degenerate_pair_events;
  j["aborted"] = r.abort_reason ? nlohmann::ordered_json(*r.abort_reason) : nlohmann::ordered_json(nullptr);
  auto& trace = j["loss_trace"] = nlohmann::ordered_json::array();
  for (const auto& e : r.loss_trace) trace.push_back({e.semantic, e.separability, e.joint});
  return j;
}

}  // namespace ezgzl::ceo
