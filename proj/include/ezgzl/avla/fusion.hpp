#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ezgzl/avla/layers.hpp"
#include "ezgzl/numerics/attention.hpp"

namespace ezgzl::avla {

struct FusionArch {
  std::size_t visual_dim = 0;
  std::size_t audio_dim = 0;
  std::size_t heads = 8;
  std::size_t head_dim = 64;
  std::size_t layers = 1;

  std::size_t model_dim() const { return heads * head_dim; }

  void validate() const {
    if (visual_dim == 0 || audio_dim == 0) throw ValidationError("fusion: feature dims must be >= 1");
    if (heads == 0 || head_dim == 0) throw ValidationError("fusion: heads and head_dim must be >= 1");
  }

  friend bool operator==(const FusionArch&, const FusionArch&) = default;
};

/// Multi-head attention with input and output projections.
struct AttentionBlock {
  Linear query, key, value, output;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    Linear::visit(self.query, f);
    Linear::visit(self.key, f);
    Linear::visit(self.value, f);
    Linear::visit(self.output, f);
  }
};

/// One direction of a fusion layer: this stream queries the other stream, then
/// residual + norm, feed-forward, residual + norm.
struct StreamLayer {
  AttentionBlock attention;
  LayerNorm norm1;
  Linear ff_in;
  Linear ff_out;
  LayerNorm norm2;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    AttentionBlock::visit(self.attention, f);
    LayerNorm::visit(self.norm1, f);
    Linear::visit(self.ff_in, f);
    Linear::visit(self.ff_out, f);
    LayerNorm::visit(self.norm2, f);
  }
};

struct FusionLayer {
  StreamLayer visual;  // visual queries audio
  StreamLayer audio;   // audio queries visual

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    StreamLayer::visit(self.visual, f);
    StreamLayer::visit(self.audio, f);
  }
};

/// Projects visual and audio features to model width and runs L cross-attention
/// layers. Output is a 2-token sequence: row 0 visual, row 1 audio.
struct FusionModel {
  FusionArch arch;
  Linear visual_proj;
  Linear audio_proj;
  std::vector<FusionLayer> layers;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    Linear::visit(self.visual_proj, f);
    Linear::visit(self.audio_proj, f);
    for (auto& l : self.layers) FusionLayer::visit(l, f);
  }

  /// Same shapes as `arch`, every parameter zero (used for gradient buffers).
  static FusionModel zeros(const FusionArch& arch) {
    arch.validate();
    const std::size_t dm = arch.model_dim();
    FusionModel m;
    m.arch = arch;
    m.visual_proj = Linear(arch.visual_dim, dm);
    m.audio_proj = Linear(arch.audio_dim, dm);
    m.layers.resize(arch.layers);
    for (auto& l : m.layers)
      for (StreamLayer* s : {&l.visual, &l.audio}) {
        s->attention = {Linear(dm, dm), Linear(dm, dm), Linear(dm, dm), Linear(dm, dm)};
        s->norm1 = LayerNorm(dm);
        s->ff_in = Linear(dm, 4 * dm);
        s->ff_out = Linear(4 * dm, dm);
        s->norm2 = LayerNorm(dm);
      }
    zero_params(m);
    return m;
  }

  /// Glorot-uniform linear maps, zero biases, unit norm scales; parameters are
  /// drawn in visit order.
  static FusionModel initialized(const FusionArch& arch, Rng& rng) {
    FusionModel m = zeros(arch);
    auto init = [&](Linear& l) { l = Linear::glorot(l.in_dim(), l.out_dim(), rng); };
    init(m.visual_proj);
    init(m.audio_proj);
    for (auto& l : m.layers)
      for (StreamLayer* s : {&l.visual, &l.audio}) {
        init(s->attention.query);
        init(s->attention.key);
        init(s->attention.value);
        init(s->attention.output);
        init(s->ff_in);
        init(s->ff_out);
        s->norm1.gamma.fill(1.0);
        s->norm2.gamma.fill(1.0);
      }
    return m;
  }
};

struct StreamCache {
  Tensor2 self_in, other_in;
  Tensor2 q, k, v, attended;
  AttentionCache attention;
  Tensor2 residual1, normed1;
  LayerNormCache norm1;
  Tensor2 hidden_pre;
  Tensor2 residual2;
  LayerNormCache norm2;
};

struct FusionCache {
  Tensor2 visual_in, audio_in;
  std::vector<std::pair<StreamCache, StreamCache>> layers;
};

namespace detail {

inline Tensor2 stream_forward(const StreamLayer& p, std::size_t heads, const Tensor2& self_in, const Tensor2& other_in,
                              StreamCache* c) {
  Tensor2 q = p.attention.query.forward(self_in);
  Tensor2 k = p.attention.key.forward(other_in);
  Tensor2 v = p.attention.value.forward(other_in);
  AttentionCache ac;
  Tensor2 attended = attention_forward(q, k, v, heads, &ac);
  Tensor2 residual1 = self_in + p.attention.output.forward(attended);
  LayerNormCache n1;
  Tensor2 normed1 = p.norm1.forward(residual1, &n1);
  Tensor2 hidden_pre = p.ff_in.forward(normed1);
  Tensor2 residual2 = normed1 + p.ff_out.forward(apply(hidden_pre, gelu));
  LayerNormCache n2;
  Tensor2 out = p.norm2.forward(residual2, &n2);
  if (c) {
    *c = {self_in,  other_in,  std::move(q),         std::move(k),         std::move(v),        std::move(attended),
          std::move(ac), std::move(residual1), std::move(normed1), std::move(n1), std::move(hidden_pre),
          std::move(residual2), std::move(n2)};
  }
  return out;
}

/// Returns (d self_in, d other_in); accumulates parameter gradients into g.
inline std::pair<Tensor2, Tensor2> stream_backward(const StreamLayer& p, std::size_t heads, const StreamCache& c,
                                                   const Tensor2& d_out, StreamLayer& g) {
  Tensor2 d_res2 = p.norm2.backward(c.norm2, d_out, g.norm2);
  const Tensor2 hidden = apply(c.hidden_pre, gelu);
  Tensor2 d_hidden = p.ff_out.backward(hidden, d_res2, g.ff_out);
  Tensor2 d_pre = apply_grad(c.hidden_pre, d_hidden, gelu_grad);
  Tensor2 d_normed1 = d_res2 + p.ff_in.backward(c.normed1, d_pre, g.ff_in);
  Tensor2 d_res1 = p.norm1.backward(c.norm1, d_normed1, g.norm1);
  Tensor2 d_attended = p.attention.output.backward(c.attended, d_res1, g.attention.output);
  AttentionGrads ag = attention_backward(c.q, c.k, c.v, heads, c.attention, d_attended);
  Tensor2 d_self = d_res1 + p.attention.query.backward(c.self_in, ag.queries, g.attention.query);
  Tensor2 d_other = p.attention.key.backward(c.other_in, ag.keys, g.attention.key) +
                    p.attention.value.backward(c.other_in, ag.values, g.attention.value);
  return {std::move(d_self), std::move(d_other)};
}

}  // namespace detail

/// Fused 2 x d_model token sequence for one sample.
inline Tensor2 fuse_audio_visual(const FusionModel& model, std::span<const double> visual, std::span<const double> audio,
                                 FusionCache* cache = nullptr) {
  if (visual.size() != model.arch.visual_dim || audio.size() != model.arch.audio_dim)
    throw DimensionError("fuse_audio_visual: expected visual " + std::to_string(model.arch.visual_dim) + ", audio " +
                         std::to_string(model.arch.audio_dim) + ", got " + std::to_string(visual.size()) + ", " +
                         std::to_string(audio.size()));
  const Tensor2 v_in = Tensor2::row_vector(visual);
  const Tensor2 a_in = Tensor2::row_vector(audio);
  Tensor2 xv = model.visual_proj.forward(v_in);
  Tensor2 xa = model.audio_proj.forward(a_in);
  if (cache) {
    cache->visual_in = v_in;
    cache->audio_in = a_in;
    cache->layers.clear();
    cache->layers.resize(model.layers.size());
  }
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    StreamCache* cv = cache ? &cache->layers[l].first : nullptr;
    StreamCache* ca = cache ? &cache->layers[l].second : nullptr;
    Tensor2 nv = detail::stream_forward(model.layers[l].visual, model.arch.heads, xv, xa, cv);
    Tensor2 na = detail::stream_forward(model.layers[l].audio, model.arch.heads, xa, xv, ca);
    xv = std::move(nv);
    xa = std::move(na);
  }
  Tensor2 tokens(2, model.arch.model_dim());
  std::copy(xv.data().begin(), xv.data().end(), tokens.row(0).begin());
  std::copy(xa.data().begin(), xa.data().end(), tokens.row(1).begin());
  return tokens;
}

/// Backpropagates d(tokens) through the fusion model; parameter gradients are
/// accumulated into `grad`.
inline void fuse_audio_visual_backward(const FusionModel& model, const FusionCache& cache, const Tensor2& d_tokens,
                                       FusionModel& grad) {
  const std::size_t dm = model.arch.model_dim();
  if (d_tokens.rows() != 2 || d_tokens.cols() != dm) throw DimensionError("fusion backward: token gradient shape");
  Tensor2 dv = Tensor2::row_vector(d_tokens.row(0));
  Tensor2 da = Tensor2::row_vector(d_tokens.row(1));
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    auto [dv_self, da_other] =
        detail::stream_backward(model.layers[l].visual, model.arch.heads, cache.layers[l].first, dv, grad.layers[l].visual);
    auto [da_self, dv_other] =
        detail::stream_backward(model.layers[l].audio, model.arch.heads, cache.layers[l].second, da, grad.layers[l].audio);
    dv = dv_self + dv_other;
    da = da_self + da_other;
  }
  model.visual_proj.backward(cache.visual_in, dv, grad.visual_proj);
  model.audio_proj.backward(cache.audio_in, da, grad.audio_proj);
}

}  // namespace ezgzl::avla
