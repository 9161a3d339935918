#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ezgzl/avla/layers.hpp"
#include "ezgzl/numerics/attention.hpp"

namespace ezgzl::avla {

enum class HeadKind : std::uint8_t { cosine = 0, linear = 1, mlp = 2, cross_attention = 3 };

inline std::string_view to_string(HeadKind k) {
  switch (k) {
    case HeadKind::cosine: return "cosine";
    case HeadKind::linear: return "linear";
    case HeadKind::mlp: return "mlp";
    case HeadKind::cross_attention: return "cross_attention";
  }
  return "?";
}

inline std::optional<HeadKind> parse_head_kind(std::string_view s) {
  if (s == "cosine") return HeadKind::cosine;
  if (s == "linear") return HeadKind::linear;
  if (s == "mlp") return HeadKind::mlp;
  if (s == "cross_attention" || s == "cross-attention" || s == "xattn") return HeadKind::cross_attention;
  return std::nullopt;
}

/// Scores a fused token sequence against class embeddings. Class embeddings whose
/// width differs from the model width go through `class_proj` first; when the
/// widths agree it is empty and the embeddings are used as they are.
///
/// Only the parameters of the active kind are allocated:
///   linear:          linear (2*d_model -> 1) on [pooled tokens; class]
///   mlp:             mlp_hidden (2*d_model -> d_model), tanh, mlp_out (d_model -> 1)
///   cross_attention: attn_query/key/value (d_model -> d_model), attention over the
///                    tokens with the class as query, then attn_proj (d_model -> 1)
struct SimilarityHead {
  HeadKind kind = HeadKind::cross_attention;
  std::size_t model_dim = 0;
  std::size_t class_dim = 0;
  std::size_t heads = 1;
  Linear class_proj;
  Linear linear;
  Linear mlp_hidden, mlp_out;
  Linear attn_query, attn_key, attn_value, attn_proj;

  bool projects_classes() const { return class_dim != model_dim; }

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    Linear::visit(self.class_proj, f);
    Linear::visit(self.linear, f);
    Linear::visit(self.mlp_hidden, f);
    Linear::visit(self.mlp_out, f);
    Linear::visit(self.attn_query, f);
    Linear::visit(self.attn_key, f);
    Linear::visit(self.attn_value, f);
    Linear::visit(self.attn_proj, f);
  }

  static SimilarityHead zeros(HeadKind kind, std::size_t class_dim, std::size_t model_dim, std::size_t heads) {
    if (class_dim == 0 || model_dim == 0) throw ValidationError("similarity head: dims must be >= 1");
    if (heads == 0 || model_dim % heads != 0) throw ValidationError("similarity head: model dim not divisible by heads");
    SimilarityHead h;
    h.kind = kind;
    h.model_dim = model_dim;
    h.class_dim = class_dim;
    h.heads = heads;
    if (h.projects_classes()) h.class_proj = Linear(class_dim, model_dim);
    switch (kind) {
      case HeadKind::cosine: break;
      case HeadKind::linear: h.linear = Linear(2 * model_dim, 1); break;
      case HeadKind::mlp:
        h.mlp_hidden = Linear(2 * model_dim, model_dim);
        h.mlp_out = Linear(model_dim, 1);
        break;
      case HeadKind::cross_attention:
        h.attn_query = Linear(model_dim, model_dim);
        h.attn_key = Linear(model_dim, model_dim);
        h.attn_value = Linear(model_dim, model_dim);
        h.attn_proj = Linear(model_dim, 1);
        break;
    }
    return h;
  }

  static SimilarityHead initialized(HeadKind kind, std::size_t class_dim, std::size_t model_dim, std::size_t heads,
                                    Rng& rng) {
    SimilarityHead h = zeros(kind, class_dim, model_dim, heads);
    auto init = [&](Linear& l) {
      if (l.weight.size() > 0) l = Linear::glorot(l.in_dim(), l.out_dim(), rng);
    };
    init(h.class_proj);
    init(h.linear);
    init(h.mlp_hidden);
    init(h.mlp_out);
    init(h.attn_query);
    init(h.attn_key);
    init(h.attn_value);
    init(h.attn_proj);
    return h;
  }
};

/// Class-side quantities shared by every sample scored against the same classes.
struct ClassContext {
  Tensor2 raw;         // C x class_dim, as given
  Tensor2 embeddings;  // C x d_model, after class_proj
  Tensor2 unit;        // cosine: unit rows of embeddings
  std::vector<double> norms;
  Tensor2 linear_part;  // linear: C x 1, class half of the linear map plus bias
  Tensor2 mlp_part;     // mlp: C x d_model, class half of mlp_hidden plus bias
  Tensor2 queries;      // cross_attention: C x d_model

  std::size_t size() const { return raw.rows(); }
};

/// Gradient buffers matching the ClassContext fields that carry gradients.
struct ClassContextGrad {
  Tensor2 unit, linear_part, mlp_part, queries;
};

inline ClassContext prepare_classes(const SimilarityHead& head, const Tensor2& class_embeddings) {
  if (class_embeddings.cols() != head.class_dim)
    throw DimensionError("similarity: class embedding width " + std::to_string(class_embeddings.cols()) +
                         " != expected " + std::to_string(head.class_dim));
  if (class_embeddings.rows() == 0) throw DimensionError("similarity: no classes");
  const std::size_t dm = head.model_dim;
  ClassContext ctx;
  ctx.raw = class_embeddings;
  ctx.embeddings = head.projects_classes() ? head.class_proj.forward(class_embeddings) : class_embeddings;
  const std::size_t c = ctx.size();
  switch (head.kind) {
    case HeadKind::cosine:
      ctx.unit = ctx.embeddings;
      ctx.norms.resize(c);
      for (std::size_t k = 0; k < c; ++k) {
        ctx.norms[k] = norm2(ctx.unit.row(k));
        if (!(ctx.norms[k] > 0.0)) throw NumericalError("cosine similarity: zero class embedding");
        for (double& x : ctx.unit.row(k)) x /= ctx.norms[k];
      }
      break;
    case HeadKind::linear:
      ctx.linear_part = Tensor2(c, 1);
      for (std::size_t k = 0; k < c; ++k) {
        double s = head.linear.bias(0, 0);
        for (std::size_t j = 0; j < dm; ++j) s += head.linear.weight(0, dm + j) * ctx.embeddings(k, j);
        ctx.linear_part(k, 0) = s;
      }
      break;
    case HeadKind::mlp:
      ctx.mlp_part = Tensor2(c, dm);
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t h = 0; h < dm; ++h) {
          double s = head.mlp_hidden.bias(0, h);
          for (std::size_t j = 0; j < dm; ++j) s += head.mlp_hidden.weight(h, dm + j) * ctx.embeddings(k, j);
          ctx.mlp_part(k, h) = s;
        }
      break;
    case HeadKind::cross_attention:
      ctx.queries = head.attn_query.forward(ctx.embeddings);
      break;
  }
  return ctx;
}

inline ClassContextGrad zero_context_grad(const ClassContext& ctx) {
  ClassContextGrad g;
  if (!ctx.unit.empty()) g.unit = Tensor2(ctx.unit.rows(), ctx.unit.cols());
  if (!ctx.linear_part.empty()) g.linear_part = Tensor2(ctx.linear_part.rows(), 1);
  if (!ctx.mlp_part.empty()) g.mlp_part = Tensor2(ctx.mlp_part.rows(), ctx.mlp_part.cols());
  if (!ctx.queries.empty()) g.queries = Tensor2(ctx.queries.rows(), ctx.queries.cols());
  return g;
}

inline void accumulate_context_grad(ClassContextGrad& a, const ClassContextGrad& b) {
  if (!a.unit.empty()) axpy(1.0, b.unit, a.unit);
  if (!a.linear_part.empty()) axpy(1.0, b.linear_part, a.linear_part);
  if (!a.mlp_part.empty()) axpy(1.0, b.mlp_part, a.mlp_part);
  if (!a.queries.empty()) axpy(1.0, b.queries, a.queries);
}

/// Per-sample forward state needed by the backward pass.
struct ScoreCache {
  std::vector<double> pooled;
  double pooled_norm = 0.0;
  Tensor2 mlp_pre;  // C x d_model
  Tensor2 keys, values, attended;
  AttentionCache attention;
};

inline std::vector<double> similarity_scores(const SimilarityHead& head, const Tensor2& tokens, const ClassContext& ctx,
                                             ScoreCache* cache = nullptr) {
  const std::size_t dm = head.model_dim;
  if (tokens.cols() != dm || tokens.rows() == 0)
    throw DimensionError("similarity: tokens " + tokens.shape_string() + " do not match model dim " +
                         std::to_string(dm));
  const std::size_t c = ctx.size();
  std::vector<double> pooled(dm, 0.0);
  for (std::size_t r = 0; r < tokens.rows(); ++r)
    for (std::size_t j = 0; j < dm; ++j) pooled[j] += tokens(r, j);
  for (double& x : pooled) x /= static_cast<double>(tokens.rows());

  std::vector<double> scores(c);
  ScoreCache local;
  ScoreCache& sc = cache ? *cache : local;
  switch (head.kind) {
    case HeadKind::cosine: {
      const double n = norm2(pooled);
      if (!(n > 0.0)) throw NumericalError("cosine similarity: zero pooled representation");
      for (std::size_t k = 0; k < c; ++k) scores[k] = dot(pooled, ctx.unit.row(k)) / n;
      sc.pooled_norm = n;
      break;
    }
    case HeadKind::linear: {
      double xs = 0.0;
      for (std::size_t j = 0; j < dm; ++j) xs += head.linear.weight(0, j) * pooled[j];
      for (std::size_t k = 0; k < c; ++k) scores[k] = xs + ctx.linear_part(k, 0);
      break;
    }
    case HeadKind::mlp: {
      std::vector<double> xs(dm, 0.0);
      for (std::size_t h = 0; h < dm; ++h)
        for (std::size_t j = 0; j < dm; ++j) xs[h] += head.mlp_hidden.weight(h, j) * pooled[j];
      sc.mlp_pre = ctx.mlp_part;
      for (std::size_t k = 0; k < c; ++k) {
        double s = head.mlp_out.bias(0, 0);
        for (std::size_t h = 0; h < dm; ++h) {
          sc.mlp_pre(k, h) += xs[h];
          s += head.mlp_out.weight(0, h) * std::tanh(sc.mlp_pre(k, h));
        }
        scores[k] = s;
      }
      break;
    }
    case HeadKind::cross_attention: {
      sc.keys = head.attn_key.forward(tokens);
      sc.values = head.attn_value.forward(tokens);
      sc.attended = attention_forward(ctx.queries, sc.keys, sc.values, head.heads, &sc.attention);
      for (std::size_t k = 0; k < c; ++k) scores[k] = dot(sc.attended.row(k), head.attn_proj.weight.row(0)) + head.attn_proj.bias(0, 0);
      break;
    }
  }
  sc.pooled = std::move(pooled);
  return scores;
}

/// Convenience form that prepares the class context on the fly.
inline std::vector<double> similarity_scores(const SimilarityHead& head, const Tensor2& tokens,
                                             const Tensor2& class_embeddings) {
  return similarity_scores(head, tokens, prepare_classes(head, class_embeddings));
}

/// Backward of similarity_scores for one sample. Accumulates head parameter
/// gradients into `grad` and class-side gradients into `ctx_grad`; returns
/// d(tokens).
inline Tensor2 similarity_backward(const SimilarityHead& head, const Tensor2& tokens, const ClassContext& ctx,
                                   const ScoreCache& sc, std::span<const double> d_scores, SimilarityHead& grad,
                                   ClassContextGrad& ctx_grad) {
  const std::size_t dm = head.model_dim;
  const std::size_t c = ctx.size();
  if (d_scores.size() != c) throw DimensionError("similarity backward: score gradient length");
  std::vector<double> d_pooled(dm, 0.0);
  Tensor2 d_tokens(tokens.rows(), dm);

  switch (head.kind) {
    case HeadKind::cosine: {
      // s_k = q . u_k with q = p / |p|
      std::vector<double> q(sc.pooled);
      for (double& x : q) x /= sc.pooled_norm;
      std::vector<double> dq(dm, 0.0);
      for (std::size_t k = 0; k < c; ++k) {
        auto u = ctx.unit.row(k);
        auto du = ctx_grad.unit.row(k);
        for (std::size_t j = 0; j < dm; ++j) {
          dq[j] += d_scores[k] * u[j];
          du[j] += d_scores[k] * q[j];
        }
      }
      const double qdq = dot(q, dq);
      for (std::size_t j = 0; j < dm; ++j) d_pooled[j] = (dq[j] - q[j] * qdq) / sc.pooled_norm;
      break;
    }
    case HeadKind::linear: {
      double total = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        total += d_scores[k];
        ctx_grad.linear_part(k, 0) += d_scores[k];
      }
      for (std::size_t j = 0; j < dm; ++j) {
        grad.linear.weight(0, j) += total * sc.pooled[j];
        d_pooled[j] = total * head.linear.weight(0, j);
      }
      break;
    }
    case HeadKind::mlp: {
      std::vector<double> d_xs(dm, 0.0);
      for (std::size_t k = 0; k < c; ++k) {
        grad.mlp_out.bias(0, 0) += d_scores[k];
        for (std::size_t h = 0; h < dm; ++h) {
          const double t = std::tanh(sc.mlp_pre(k, h));
          grad.mlp_out.weight(0, h) += d_scores[k] * t;
          const double d_pre = d_scores[k] * head.mlp_out.weight(0, h) * (1.0 - t * t);
          ctx_grad.mlp_part(k, h) += d_pre;
          d_xs[h] += d_pre;
        }
      }
      for (std::size_t h = 0; h < dm; ++h)
        for (std::size_t j = 0; j < dm; ++j) {
          grad.mlp_hidden.weight(h, j) += d_xs[h] * sc.pooled[j];
          d_pooled[j] += d_xs[h] * head.mlp_hidden.weight(h, j);
        }
      break;
    }
    case HeadKind::cross_attention: {
      Tensor2 d_attended(c, dm);
      for (std::size_t k = 0; k < c; ++k) {
        grad.attn_proj.bias(0, 0) += d_scores[k];
        for (std::size_t j = 0; j < dm; ++j) {
          grad.attn_proj.weight(0, j) += d_scores[k] * sc.attended(k, j);
          d_attended(k, j) = d_scores[k] * head.attn_proj.weight(0, j);
        }
      }
      AttentionGrads ag = attention_backward(ctx.queries, sc.keys, sc.values, head.heads, sc.attention, d_attended);
      axpy(1.0, ag.queries, ctx_grad.queries);
      d_tokens = head.attn_key.backward(tokens, ag.keys, grad.attn_key) +
                 head.attn_value.backward(tokens, ag.values, grad.attn_value);
      break;
    }
  }
  const double inv_t = 1.0 / static_cast<double>(tokens.rows());
  for (std::size_t r = 0; r < tokens.rows(); ++r)
    for (std::size_t j = 0; j < dm; ++j) d_tokens(r, j) += d_pooled[j] * inv_t;
  return d_tokens;
}

/// Pushes accumulated class-side gradients back through the per-class
/// precomputation and the class projection. The class embeddings themselves get
/// no update.
inline void class_context_backward(const SimilarityHead& head, const ClassContext& ctx, const ClassContextGrad& g,
                                   SimilarityHead& grad) {
  const std::size_t dm = head.model_dim;
  const std::size_t c = ctx.size();
  Tensor2 d_emb(c, dm);
  switch (head.kind) {
    case HeadKind::cosine:
      for (std::size_t k = 0; k < c; ++k) {
        auto u = ctx.unit.row(k);
        auto du = g.unit.row(k);
        const double udu = dot(u, du);
        for (std::size_t j = 0; j < dm; ++j) d_emb(k, j) = (du[j] - u[j] * udu) / ctx.norms[k];
      }
      break;
    case HeadKind::linear:
      for (std::size_t k = 0; k < c; ++k) {
        const double d = g.linear_part(k, 0);
        grad.linear.bias(0, 0) += d;
        for (std::size_t j = 0; j < dm; ++j) {
          grad.linear.weight(0, dm + j) += d * ctx.embeddings(k, j);
          d_emb(k, j) = d * head.linear.weight(0, dm + j);
        }
      }
      break;
    case HeadKind::mlp:
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t h = 0; h < dm; ++h) {
          const double d = g.mlp_part(k, h);
          grad.mlp_hidden.bias(0, h) += d;
          for (std::size_t j = 0; j < dm; ++j) {
            grad.mlp_hidden.weight(h, dm + j) += d * ctx.embeddings(k, j);
            d_emb(k, j) += d * head.mlp_hidden.weight(h, dm + j);
          }
        }
      break;
    case HeadKind::cross_attention:
      d_emb = head.attn_query.backward(ctx.embeddings, g.queries, grad.attn_query);
      break;
  }
  if (head.projects_classes()) head.class_proj.backward(ctx.raw, d_emb, grad.class_proj);
}

}  // namespace ezgzl::avla
