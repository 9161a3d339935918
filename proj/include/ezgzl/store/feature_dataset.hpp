#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ezgzl/store/binary_io.hpp"
#include "ezgzl/store/class_split.hpp"
#include "ezgzl/store/embedding_bank.hpp"

namespace ezgzl::store {

enum class Partition : std::uint8_t { train = 0, val = 1, test = 2 };

inline std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::train: return "train";
    case Partition::val: return "val";
    case Partition::test: return "test";
  }
  return "?";
}

/// Per-sample visual and audio features with class labels and partition tags.
/// Labels index into the EmbeddingBank the dataset was loaded against.
class FeatureDataset {
 public:
  FeatureDataset() = default;

  FeatureDataset(Tensor2 visual, Tensor2 audio, std::vector<std::size_t> labels, std::vector<Partition> partition,
                 const ClassSplit& split)
      : visual_(std::move(visual)), audio_(std::move(audio)), labels_(std::move(labels)), partition_(std::move(partition)) {
    const std::size_t n = visual_.rows();
    if (n == 0) throw ValidationError("feature dataset: no samples");
    if (visual_.cols() == 0 || audio_.cols() == 0) throw DimensionError("feature dim mismatch: zero-width features");
    if (audio_.rows() != n || labels_.size() != n || partition_.size() != n)
      throw DimensionError("feature dim mismatch: per-sample arrays disagree in length");
    for (std::size_t i = 0; i < n; ++i) {
      if (labels_[i] >= split.class_count())
        throw ValidationError("sample " + std::to_string(i) + ": label out of range");
      if (static_cast<std::uint8_t>(partition_[i]) > 2) throw ValidationError("invalid partition tag");
      if (partition_[i] == Partition::train && !split.is_seen(labels_[i]))
        throw ValidationError("unseen class in train partition (sample " + std::to_string(i) + ")");
    }
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t visual_dim() const { return visual_.cols(); }
  std::size_t audio_dim() const { return audio_.cols(); }
  const Tensor2& visual() const { return visual_; }
  const Tensor2& audio() const { return audio_; }
  const std::vector<std::size_t>& labels() const { return labels_; }
  const std::vector<Partition>& partition() const { return partition_; }

  std::vector<std::size_t> indices_in(Partition p) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i)
      if (partition_[i] == p) out.push_back(i);
    return out;
  }

  friend bool operator==(const FeatureDataset& a, const FeatureDataset& b) {
    return a.visual_ == b.visual_ && a.audio_ == b.audio_ && a.labels_ == b.labels_ && a.partition_ == b.partition_;
  }

 private:
  Tensor2 visual_;
  Tensor2 audio_;
  std::vector<std::size_t> labels_;
  std::vector<Partition> partition_;
};

inline constexpr std::string_view kFeatureDatasetMagic = "EZF1";

/// EZF layout: "EZF1" | u32 N | u32 d_v | u32 d_a | N x (u16 len, class name,
/// u8 partition, d_v f64, d_a f64). All little-endian.
inline std::vector<std::uint8_t> encode_feature_dataset(const FeatureDataset& ds, const EmbeddingBank& bank) {
  ByteWriter w;
  w.put_bytes(kFeatureDatasetMagic);
  w.put_u32(static_cast<std::uint32_t>(ds.size()));
  w.put_u32(static_cast<std::uint32_t>(ds.visual_dim()));
  w.put_u32(static_cast<std::uint32_t>(ds.audio_dim()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    w.put_string16(bank.class_names().at(ds.labels()[i]));
    w.put_u8(static_cast<std::uint8_t>(ds.partition()[i]));
    for (double x : ds.visual().row(i)) w.put_f64(x);
    for (double x : ds.audio().row(i)) w.put_f64(x);
  }
  return w.take();
}

inline FeatureDataset decode_feature_dataset(std::span<const std::uint8_t> bytes, const EmbeddingBank& bank,
                                             const ClassSplit& split) {
  if (split.class_count() != bank.size()) throw ValidationError("class split does not match embedding bank");
  ByteReader r(bytes);
  expect_magic(r, kFeatureDatasetMagic);
  const std::uint32_t n = r.get_u32();
  const std::uint32_t dv = r.get_u32();
  const std::uint32_t da = r.get_u32();
  if (n == 0) throw ValidationError("feature dataset: no samples");
  if (dv == 0 || da == 0) throw FormatError("feature dim mismatch: zero-width features in header");

  // Structural pass: every record must hold exactly d_v + d_a doubles.
  {
    ByteReader probe(bytes);
    probe.skip(16);
    try {
      for (std::uint32_t i = 0; i < n; ++i) {
        probe.skip(probe.get_u16());
        probe.skip(1 + 8 * (static_cast<std::size_t>(dv) + da));
      }
    } catch (const FormatError&) {
      throw FormatError("feature dim mismatch: records do not match header widths d_v=" + std::to_string(dv) +
                        ", d_a=" + std::to_string(da));
    }
    if (!probe.at_end())
      throw FormatError("feature dim mismatch: " + std::to_string(probe.remaining()) + " trailing bytes");
  }

  std::vector<double> visual, audio;
  visual.reserve(static_cast<std::size_t>(n) * dv);
  audio.reserve(static_cast<std::size_t>(n) * da);
  std::vector<std::size_t> labels;
  std::vector<Partition> partition;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string name = r.get_string16();
    const auto idx = bank.index_of(name);
    if (!idx) throw ValidationError("unknown class name: " + name);
    const std::uint8_t tag = r.get_u8();
    if (tag > 2) throw FormatError("invalid partition tag " + std::to_string(tag));
    labels.push_back(*idx);
    partition.push_back(static_cast<Partition>(tag));
    for (std::uint32_t k = 0; k < dv; ++k) visual.push_back(r.get_f64());
    for (std::uint32_t k = 0; k < da; ++k) audio.push_back(r.get_f64());
  }
  return FeatureDataset(Tensor2(n, dv, std::move(visual)), Tensor2(n, da, std::move(audio)), std::move(labels),
                        std::move(partition), split);
}

inline FeatureDataset load_feature_dataset(const std::filesystem::path& path, const EmbeddingBank& bank,
                                           const ClassSplit& split) {
  return decode_feature_dataset(read_file(path), bank, split);
}

inline void save_feature_dataset(const FeatureDataset& ds, const EmbeddingBank& bank, const std::filesystem::path& path) {
  write_file(path, encode_feature_dataset(ds, bank));
}

}  // namespace ezgzl::store
