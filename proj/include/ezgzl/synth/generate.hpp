#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ezgzl/numerics/rng.hpp"
#include "ezgzl/numerics/sphere.hpp"
#include "ezgzl/store/class_split.hpp"
#include "ezgzl/store/embedding_bank.hpp"
#include "ezgzl/store/feature_dataset.hpp"

namespace ezgzl::synth {

struct SynthConfig {
  std::size_t n_classes = 18;
  std::size_t n_seen = 12;
  std::size_t dim_text = 32;
  std::size_t dim_visual = 64;
  std::size_t dim_audio = 48;
  std::size_t train_per_class = 40;
  std::size_t val_per_class = 10;
  std::size_t test_per_class = 10;
  /// Norm of the expected per-sample feature noise relative to the unit prototype.
  double noise_sigma = 0.4;
  std::size_t semantic_clusters = 3;
  /// Norm of the expected offset of a class text embedding from its cluster centroid.
  double semantic_spread = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_classes < 2) throw ValidationError("synth: n_classes must be >= 2");
    if (n_seen == 0 || n_seen >= n_classes) throw ValidationError("synth: need 0 < n_seen < n_classes");
    if (dim_text == 0 || dim_visual == 0 || dim_audio == 0) throw ValidationError("synth: dimensions must be >= 1");
    if (!(noise_sigma >= 0.0)) throw ValidationError("synth: noise_sigma must be >= 0");
    if (!(semantic_spread >= 0.0)) throw ValidationError("synth: semantic_spread must be >= 0");
    if (semantic_clusters == 0 || semantic_clusters > n_classes)
      throw ValidationError("synth: semantic_clusters must lie in [1, n_classes]");
    if (train_per_class == 0) throw ValidationError("synth: train_per_class must be >= 1");
    if (test_per_class == 0) throw ValidationError("synth: test_per_class must be >= 1");
  }
};

struct Benchmark {
  store::EmbeddingBank bank;
  store::ClassSplit split;
  store::FeatureDataset dataset;
  /// Super-group of every class (class c belongs to cluster c mod K).
  std::vector<std::size_t> cluster_of;
};

namespace detail {

inline std::vector<double> gaussian_vector(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline Tensor2 gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  return Tensor2(rows, cols, gaussian_vector(rng, rows * cols, scale));
}

inline std::vector<double> noisy_unit(Rng& rng, std::span<const double> proto, double sigma) {
  std::vector<double> v(proto.begin(), proto.end());
  if (sigma > 0.0) {
    const double s = sigma / std::sqrt(static_cast<double>(v.size()));
    for (double& x : v) x += s * rng.normal();
  }
  return project_to_sphere(v);
}

}  // namespace detail

/// Classes are assigned round-robin to clusters and the last n_classes - n_seen
/// classes are unseen, so every cluster mixes seen and unseen classes when
/// n_seen >= semantic_clusters.
inline Benchmark generate_benchmark(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t c = cfg.n_classes, d = cfg.dim_text;

  Tensor2 centroids = detail::gaussian_matrix(rng, cfg.semantic_clusters, d, 1.0);
  project_rows_to_sphere(centroids);

  std::vector<std::string> names;
  std::vector<std::size_t> cluster_of(c);
  Tensor2 text(c, d);
  const double spread = cfg.semantic_spread / std::sqrt(static_cast<double>(d));
  for (std::size_t k = 0; k < c; ++k) {
    cluster_of[k] = k % cfg.semantic_clusters;
    std::ostringstream name;
    name << "class_" << std::setw(3) << std::setfill('0') << k << "_g" << cluster_of[k];
    names.push_back(name.str());
    auto row = text.row(k);
    auto cent = centroids.row(cluster_of[k]);
    for (std::size_t j = 0; j < d; ++j) row[j] = cent[j] + spread * rng.normal();
  }
  project_rows_to_sphere(text);

  // Fixed random linear maps from text space to each modality.
  const Tensor2 to_visual = detail::gaussian_matrix(rng, cfg.dim_visual, d, 1.0 / std::sqrt(static_cast<double>(d)));
  const Tensor2 to_audio = detail::gaussian_matrix(rng, cfg.dim_audio, d, 1.0 / std::sqrt(static_cast<double>(d)));
  Tensor2 proto_v = matmul_nt(text, to_visual);
  Tensor2 proto_a = matmul_nt(text, to_audio);
  project_rows_to_sphere(proto_v);
  project_rows_to_sphere(proto_a);

  std::vector<std::size_t> seen, unseen;
  for (std::size_t k = 0; k < c; ++k) (k < cfg.n_seen ? seen : unseen).push_back(k);
  store::ClassSplit split(seen, unseen, c);

  std::vector<double> visual, audio;
  std::vector<std::size_t> labels;
  std::vector<store::Partition> parts;
  auto emit = [&](std::size_t k, store::Partition p, std::size_t count) {
    for (std::size_t s = 0; s < count; ++s) {
      auto v = detail::noisy_unit(rng, proto_v.row(k), cfg.noise_sigma);
      auto a = detail::noisy_unit(rng, proto_a.row(k), cfg.noise_sigma);
      visual.insert(visual.end(), v.begin(), v.end());
      audio.insert(audio.end(), a.begin(), a.end());
      labels.push_back(k);
      parts.push_back(p);
    }
  };
  for (std::size_t k = 0; k < c; ++k) {
    if (k < cfg.n_seen) emit(k, store::Partition::train, cfg.train_per_class);
    emit(k, store::Partition::val, cfg.val_per_class);
    emit(k, store::Partition::test, cfg.test_per_class);
  }
  const std::size_t n = labels.size();
  store::FeatureDataset ds(Tensor2(n, cfg.dim_visual, std::move(visual)), Tensor2(n, cfg.dim_audio, std::move(audio)),
                           std::move(labels), std::move(parts), split);
  return {store::EmbeddingBank(std::move(names), std::move(text)), std::move(split), std::move(ds),
          std::move(cluster_of)};
}

}  // namespace ezgzl::synth
