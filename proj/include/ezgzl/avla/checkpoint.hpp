#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ezgzl/avla/train.hpp"
#include "ezgzl/store/binary_io.hpp"

namespace ezgzl::avla {

inline constexpr std::string_view kCheckpointMagic = "EZM1";

// EZM layout, little-endian:
//   "EZM1"
//   u32 batch_size | u32 epochs | f64 lr | f64 beta1 | f64 beta2 | f64 weight_decay |
//   u64 seed | u8 head_kind | u32 layers | u32 heads | u32 head_dim |
//   u8 embeddings (0 optimized, 1 initial) | u8 dedup_denominator |
//   u32 d_v | u32 d_a | u32 class_dim | u64 parameter count
//   f64 parameters: fusion model then similarity head, each in visit order
//     fusion: visual_proj, audio_proj, then per layer the visual stream and the
//             audio stream as (query, key, value, output, norm1, ff_in, ff_out, norm2)
//     head:   class_proj, linear, mlp_hidden, mlp_out, attn_query, attn_key,
//             attn_value, attn_proj (tensors of inactive parts are empty)
//   Linear = weight [out x in] row-major, then bias; LayerNorm = gamma, then beta.

inline std::vector<std::uint8_t> encode_checkpoint(const TrainedModel& m) {
  const TrainConfig& c = m.config;
  store::ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  w.put_u32(static_cast<std::uint32_t>(c.batch_size));
  w.put_u32(static_cast<std::uint32_t>(c.epochs));
  w.put_f64(c.lr);
  w.put_f64(c.beta1);
  w.put_f64(c.beta2);
  w.put_f64(c.weight_decay);
  w.put_u64(c.seed);
  w.put_u8(static_cast<std::uint8_t>(c.head_kind));
  w.put_u32(static_cast<std::uint32_t>(c.layers));
  w.put_u32(static_cast<std::uint32_t>(c.heads));
  w.put_u32(static_cast<std::uint32_t>(c.head_dim));
  w.put_u8(static_cast<std::uint8_t>(c.embeddings));
  w.put_u8(c.dedup_denominator ? 1 : 0);
  w.put_u32(static_cast<std::uint32_t>(m.fusion.arch.visual_dim));
  w.put_u32(static_cast<std::uint32_t>(m.fusion.arch.audio_dim));
  w.put_u32(static_cast<std::uint32_t>(m.head.class_dim));
  w.put_u64(param_count(m.fusion) + param_count(m.head));
  for (double x : flatten_params(m.fusion)) w.put_f64(x);
  for (double x : flatten_params(m.head)) w.put_f64(x);
  return w.take();
}

inline TrainedModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  store::ByteReader r(bytes);
  store::expect_magic(r, kCheckpointMagic);
  TrainConfig c;
  c.batch_size = r.get_u32();
  c.epochs = r.get_u32();
  c.lr = r.get_f64();
  c.beta1 = r.get_f64();
  c.beta2 = r.get_f64();
  c.weight_decay = r.get_f64();
  c.seed = r.get_u64();
  const std::uint8_t kind = r.get_u8();
  if (kind > 3) throw FormatError("EZM: invalid head kind " + std::to_string(kind));
  c.head_kind = static_cast<HeadKind>(kind);
  c.layers = r.get_u32();
  c.heads = r.get_u32();
  c.head_dim = r.get_u32();
  const std::uint8_t source = r.get_u8();
  if (source > 1) throw FormatError("EZM: invalid embedding source " + std::to_string(source));
  c.embeddings = static_cast<EmbeddingSource>(source);
  const std::uint8_t dedup = r.get_u8();
  if (dedup > 1) throw FormatError("EZM: invalid dedup flag");
  c.dedup_denominator = dedup == 1;
  const std::size_t dv = r.get_u32(), da = r.get_u32(), dc = r.get_u32();
  const std::uint64_t count = r.get_u64();
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("EZM: invalid config block: ") + e.what());
  }

  TrainedModel m{c, FusionModel::zeros(c.arch(dv, da)), SimilarityHead::zeros(c.head_kind, dc, c.heads * c.head_dim, c.heads)};
  const std::size_t nf = param_count(m.fusion), nh = param_count(m.head);
  if (count != nf + nh || r.remaining() != 8 * count)
    throw FormatError("EZM: dimension mismatch: header implies " + std::to_string(nf + nh) + " parameters, file holds " +
                      std::to_string(count) + " (" + std::to_string(r.remaining()) + " payload bytes)");
  std::vector<double> flat(count);
  for (double& x : flat) x = r.get_f64();
  assign_params(m.fusion, std::span<const double>(flat).first(nf));
  assign_params(m.head, std::span<const double>(flat).subspan(nf));
  for (double x : flat)
    if (!std::isfinite(x)) throw FormatError("EZM: non-finite parameter");
  return m;
}

inline void save_checkpoint(const TrainedModel& m, const std::filesystem::path& path) {
  store::write_file(path, encode_checkpoint(m));
}

inline TrainedModel load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(store::read_file(path)); }

}  // namespace ezgzl::avla
