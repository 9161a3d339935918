#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ezgzl/numerics/sphere.hpp"
#include "ezgzl/numerics/tensor.hpp"
#include "ezgzl/store/binary_io.hpp"

namespace ezgzl::store {

/// Rows within this distance of unit norm are stored as-is.
inline constexpr double kUnitNormTolerance = 1e-9;
/// Rows within this distance are renormalized on ingestion; worse rows are rejected.
inline constexpr double kRenormalizeTolerance = 1e-6;

/// Named class embeddings: the initial text embeddings and, once optimized, their
/// replacements. Row i of both matrices belongs to class_names[i].
class EmbeddingBank {
 public:
  EmbeddingBank() = default;

  /// Validates every invariant; rows that are off unit norm by at most 1e-6 are
  /// renormalized, anything worse is rejected.
  EmbeddingBank(std::vector<std::string> class_names, Tensor2 initial, std::optional<Tensor2> optimized = std::nullopt)
      : names_(std::move(class_names)), initial_(std::move(initial)), optimized_(std::move(optimized)) {
    if (names_.empty()) throw ValidationError("embedding bank: no classes");
    if (initial_.rows() != names_.size())
      throw DimensionError("embedding bank: " + std::to_string(names_.size()) + " names but " +
                           std::to_string(initial_.rows()) + " rows");
    if (initial_.cols() == 0) throw DimensionError("embedding bank: zero dimension");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      auto [it, inserted] = index_.emplace(names_[i], i);
      if (!inserted) throw ValidationError("duplicate class name: " + names_[i]);
    }
    ingest_rows(initial_, "initial");
    if (optimized_) {
      if (!optimized_->same_shape(initial_))
        throw DimensionError("embedding bank: optimized block " + optimized_->shape_string() + " vs initial " +
                             initial_.shape_string());
      ingest_rows(*optimized_, "optimized");
    }
  }

  std::size_t size() const { return names_.size(); }
  std::size_t dim() const { return initial_.cols(); }
  const std::vector<std::string>& class_names() const { return names_; }
  const Tensor2& initial() const { return initial_; }
  const std::optional<Tensor2>& optimized() const { return optimized_; }
  bool has_optimized() const { return optimized_.has_value(); }

  std::optional<std::size_t> index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  EmbeddingBank with_optimized(Tensor2 optimized) const { return EmbeddingBank(names_, initial_, std::move(optimized)); }

  friend bool operator==(const EmbeddingBank& a, const EmbeddingBank& b) {
    return a.names_ == b.names_ && a.initial_ == b.initial_ && a.optimized_ == b.optimized_;
  }

 private:
  static void ingest_rows(Tensor2& m, const char* which) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto row = m.row(r);
      const double n = norm2(row);
      const double dev = std::abs(n - 1.0);
      if (dev <= kUnitNormTolerance) continue;
      if (!(dev <= kRenormalizeTolerance))
        throw ValidationError(std::string("non-unit embedding: ") + which + " row " + std::to_string(r) +
                              " has norm " + std::to_string(n));
      for (double& x : row) x /= n;
    }
  }

  std::vector<std::string> names_;
  Tensor2 initial_;
  std::optional<Tensor2> optimized_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::string_view kEmbeddingBankMagic = "EZB1";

/// EZB layout: "EZB1" | u32 C | u32 d | u8 has_optimized | C x (u16 len, UTF-8 name)
/// | C*d f64 initial | [C*d f64 optimized]. All little-endian.
inline std::vector<std::uint8_t> encode_embedding_bank(const EmbeddingBank& bank) {
  ByteWriter w;
  w.put_bytes(kEmbeddingBankMagic);
  w.put_u32(static_cast<std::uint32_t>(bank.size()));
  w.put_u32(static_cast<std::uint32_t>(bank.dim()));
  w.put_u8(bank.has_optimized() ? 1 : 0);
  for (const auto& n : bank.class_names()) w.put_string16(n);
  for (double x : bank.initial().data()) w.put_f64(x);
  if (bank.has_optimized())
    for (double x : bank.optimized()->data()) w.put_f64(x);
  return w.take();
}

inline EmbeddingBank decode_embedding_bank(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  expect_magic(r, kEmbeddingBankMagic);
  const std::uint32_t count = r.get_u32();
  const std::uint32_t dim = r.get_u32();
  const std::uint8_t flag = r.get_u8();
  if (flag > 1) throw FormatError("EZB: invalid has_optimized flag " + std::to_string(flag));
  if (count == 0 || dim == 0) throw FormatError("EZB: dimension/count mismatch (zero classes or dimension)");
  std::vector<std::string> names;
  names.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) names.push_back(r.get_string16());
  const std::size_t block = static_cast<std::size_t>(count) * dim;
  const std::size_t expected = block * 8 * (flag ? 2 : 1);
  if (r.remaining() != expected)
    throw FormatError("EZB: dimension/count mismatch: expected " + std::to_string(expected) + " payload bytes, found " +
                      std::to_string(r.remaining()));
  auto read_block = [&] {
    std::vector<double> v(block);
    for (double& x : v) x = r.get_f64();
    return Tensor2(count, dim, std::move(v));
  };
  Tensor2 initial = read_block();
  std::optional<Tensor2> optimized;
  if (flag) optimized = read_block();
  return EmbeddingBank(std::move(names), std::move(initial), std::move(optimized));
}

inline EmbeddingBank load_embedding_bank(const std::filesystem::path& path) {
  return decode_embedding_bank(read_file(path));
}

inline void save_embedding_bank(const EmbeddingBank& bank, const std::filesystem::path& path) {
  write_file(path, encode_embedding_bank(bank));
}

}  // namespace ezgzl::store
