#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ezgzl/avla/contrastive.hpp"
#include "ezgzl/avla/fusion.hpp"
#include "ezgzl/avla/similarity.hpp"
#include "ezgzl/numerics/adam.hpp"
#include "ezgzl/numerics/parallel.hpp"
#include "ezgzl/store/embedding_bank.hpp"
#include "ezgzl/store/feature_dataset.hpp"

namespace ezgzl::avla {

/// Which block of the bank the model aligns to. `initial` is the no-CEO ablation.
enum class EmbeddingSource : std::uint8_t { optimized = 0, initial = 1 };

inline std::string_view to_string(EmbeddingSource s) { return s == EmbeddingSource::initial ? "initial" : "optimized"; }

inline std::optional<EmbeddingSource> parse_embedding_source(std::string_view s) {
  if (s == "optimized") return EmbeddingSource::optimized;
  if (s == "initial") return EmbeddingSource::initial;
  return std::nullopt;
}

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
  HeadKind head_kind = HeadKind::cross_attention;
  std::size_t layers = 1;
  std::size_t heads = 8;
  std::size_t head_dim = 64;
  EmbeddingSource embeddings = EmbeddingSource::optimized;
  bool dedup_denominator = false;

  void validate() const {
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (!(lr > 0.0)) throw ValidationError("lr must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ValidationError("beta1 and beta2 must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
    if (heads < 1 || head_dim < 1) throw ValidationError("heads and head_dim must be >= 1");
  }

  FusionArch arch(std::size_t visual_dim, std::size_t audio_dim) const {
    return {visual_dim, audio_dim, heads, head_dim, layers};
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainedModel {
  TrainConfig config;
  FusionModel fusion;
  SimilarityHead head;
};

struct TrainResult {
  TrainedModel model;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

/// The class embedding block selected by `source`.
inline const Tensor2& class_embeddings(const store::EmbeddingBank& bank, EmbeddingSource source) {
  if (source == EmbeddingSource::initial) return bank.initial();
  if (!bank.has_optimized())
    throw ValidationError("embedding bank has no optimized embeddings; run optimize or select embeddings = initial");
  return *bank.optimized();
}

inline TrainedModel init_model(const TrainConfig& config, std::size_t visual_dim, std::size_t audio_dim,
                               std::size_t class_dim) {
  config.validate();
  Rng rng(config.seed);
  Rng init_rng(rng.fork_seed());
  TrainedModel m{config, FusionModel::initialized(config.arch(visual_dim, audio_dim), init_rng), {}};
  m.head = SimilarityHead::initialized(config.head_kind, class_dim, m.fusion.arch.model_dim(), config.heads, init_rng);
  return m;
}

namespace detail {

inline constexpr std::size_t kGradientChunks = 4;

struct ChunkGrad {
  FusionModel fusion;
  SimilarityHead head;
  ClassContextGrad context;
  double loss = 0.0;
};

/// Forward, loss row and backward for batch entry i; gradients go into g.
inline void train_sample(const TrainedModel& m, const store::FeatureDataset& ds, std::span<const std::size_t> batch,
                         std::span<const std::size_t> batch_labels, std::span<const std::size_t> column_class,
                         const ClassContext& ctx, bool dedup, std::size_t i, ChunkGrad& g) {
  const std::size_t b = batch.size();
  const std::size_t sample = batch[i];
  FusionCache fc;
  const Tensor2 tokens = fuse_audio_visual(m.fusion, ds.visual().row(sample), ds.audio().row(sample), &fc);
  ScoreCache sc;
  const std::vector<double> class_scores = similarity_scores(m.head, tokens, ctx, &sc);

  std::vector<double> row(b), probs(b);
  for (std::size_t k = 0; k < b; ++k) row[k] = class_scores[column_class[k]];
  const auto keep = contrastive_columns(batch_labels, i, dedup);
  g.loss += contrastive_row(row, i, keep, probs);

  const double inv_b = 1.0 / static_cast<double>(b);
  std::vector<double> d_class(class_scores.size(), 0.0);
  for (std::size_t k = 0; k < b; ++k) d_class[column_class[k]] += (probs[k] - (k == i ? 1.0 : 0.0)) * inv_b;
  const Tensor2 d_tokens = similarity_backward(m.head, tokens, ctx, sc, d_class, g.head, g.context);
  fuse_audio_visual_backward(m.fusion, fc, d_tokens, g.fusion);
}

}  // namespace detail

struct BatchGradient {
  double loss = 0.0;
  FusionModel fusion;
  SimilarityHead head;
};

/// Mean contrastive loss of one batch and its gradient w.r.t. every model
/// parameter. Work is split into fixed contiguous chunks reduced in order, so the
/// result is bit-identical for any worker count.
inline BatchGradient batch_gradient(const TrainedModel& m, const store::FeatureDataset& ds, const Tensor2& classes,
                                    std::span<const std::size_t> batch, std::size_t workers = 1) {
  const std::size_t b = batch.size();
  if (b == 0) throw ValidationError("empty batch");
  std::vector<std::size_t> labels(b);
  for (std::size_t k = 0; k < b; ++k) labels[k] = ds.labels()[batch[k]];
  std::vector<std::size_t> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::size_t> column_class(b);
  for (std::size_t k = 0; k < b; ++k)
    column_class[k] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), labels[k]) - distinct.begin());

  Tensor2 sub(distinct.size(), classes.cols());
  for (std::size_t u = 0; u < distinct.size(); ++u) std::copy_n(classes.row(distinct[u]).begin(), classes.cols(), sub.row(u).begin());
  const ClassContext ctx = prepare_classes(m.head, sub);

  const std::size_t chunks = std::min(detail::kGradientChunks, b);
  std::vector<detail::ChunkGrad> parts(chunks);
  parallel_tasks(chunks, workers, [&](std::size_t c) {
    auto& g = parts[c];
    g.fusion = FusionModel::zeros(m.fusion.arch);
    g.head = SimilarityHead::zeros(m.head.kind, m.head.class_dim, m.head.model_dim, m.head.heads);
    g.context = zero_context_grad(ctx);
    const std::size_t lo = c * b / chunks, hi = (c + 1) * b / chunks;
    for (std::size_t i = lo; i < hi; ++i)
      detail::train_sample(m, ds, batch, labels, column_class, ctx, m.config.dedup_denominator, i, g);
  });

  BatchGradient out{0.0, std::move(parts[0].fusion), std::move(parts[0].head)};
  ClassContextGrad context = std::move(parts[0].context);
  double loss = parts[0].loss;
  for (std::size_t c = 1; c < chunks; ++c) {
    accumulate_params(out.fusion, parts[c].fusion);
    accumulate_params(out.head, parts[c].head);
    accumulate_context_grad(context, parts[c].context);
    loss += parts[c].loss;
  }
  class_context_backward(m.head, ctx, context, out.head);
  out.loss = loss / static_cast<double>(b);
  return out;
}

/// Adam over shuffled mini-batches of the train partition. The bank is only read:
/// class embeddings stay frozen and only fusion and head parameters move.
inline TrainResult train_alignment(const store::FeatureDataset& ds, const store::EmbeddingBank& bank,
                                   const TrainConfig& config, std::size_t workers = worker_count()) {
  config.validate();
  const Tensor2& classes = class_embeddings(bank, config.embeddings);
  std::vector<std::size_t> order = ds.indices_in(store::Partition::train);
  if (order.empty()) throw ValidationError("empty train partition");
  for (std::size_t i : order)
    if (ds.labels()[i] >= bank.size()) throw ValidationError("dataset label out of range for embedding bank");

  TrainResult result{init_model(config, ds.visual_dim(), ds.audio_dim(), bank.dim()), {}};
  TrainedModel& m = result.model;
  Rng seed_rng(config.seed);
  seed_rng.fork_seed();
  Rng shuffle_rng(seed_rng.fork_seed());

  const AdamHyper hyper{config.lr, config.beta1, config.beta2, 1e-8, config.weight_decay};
  std::vector<AdamState> states;
  auto make_state = [&](const Tensor2& t) { states.emplace_back(t.rows(), t.cols(), hyper); };
  FusionModel::visit(m.fusion, make_state);
  SimilarityHead::visit(m.head, make_state);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      BatchGradient g = batch_gradient(m, ds, classes, std::span(order).subspan(start, end - start), workers);
      if (!std::isfinite(g.loss)) throw NumericalError("non-finite training loss in epoch " + std::to_string(epoch + 1));
      total += g.loss;
      ++batches;

      std::vector<const Tensor2*> grads;
      auto collect = [&](const Tensor2& t) { grads.push_back(&t); };
      FusionModel::visit(g.fusion, collect);
      SimilarityHead::visit(g.head, collect);
      std::size_t idx = 0;
      auto step = [&](Tensor2& p) {
        adam_step(p, *grads[idx], states[idx]);
        ++idx;
      };
      FusionModel::visit(m.fusion, step);
      SimilarityHead::visit(m.head, step);
    }
    result.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return result;
}

enum class LabelSpace : std::uint8_t { all = 0, seen_only = 1, unseen_only = 2 };

inline std::string_view to_string(LabelSpace s) {
  switch (s) {
    case LabelSpace::all: return "all";
    case LabelSpace::seen_only: return "seen_only";
    case LabelSpace::unseen_only: return "unseen_only";
  }
  return "?";
}

inline std::vector<std::size_t> label_space_classes(const store::ClassSplit& split, LabelSpace space) {
  switch (space) {
    case LabelSpace::seen_only: return split.seen();
    case LabelSpace::unseen_only: return split.unseen();
    case LabelSpace::all: break;
  }
  return split.all();
}

/// Index in `allowed` order with the highest score; ties go to the smallest class
/// index.
inline std::size_t argmax_over(std::span<const double> scores, std::span<const std::size_t> allowed) {
  if (allowed.empty()) throw ValidationError("empty label space");
  std::size_t best = allowed[0];
  for (std::size_t c : allowed) {
    if (c >= scores.size()) throw DimensionError("label space class out of range");
    if (scores[c] > scores[best] || (scores[c] == scores[best] && c < best)) best = c;
  }
  return best;
}

/// A trained model bound to a fixed set of class embeddings.
class Classifier {
 public:
  Classifier(const TrainedModel& model, const Tensor2& classes)
      : model_(&model), context_(prepare_classes(model.head, classes)) {}

  std::vector<double> scores(std::span<const double> visual, std::span<const double> audio) const {
    return similarity_scores(model_->head, fuse_audio_visual(model_->fusion, visual, audio), context_);
  }

  std::size_t class_count() const { return context_.size(); }

 private:
  const TrainedModel* model_;
  ClassContext context_;
};

inline std::size_t predict(const TrainedModel& model, const store::EmbeddingBank& bank, const store::ClassSplit& split,
                           std::span<const double> visual, std::span<const double> audio, LabelSpace space) {
  const Classifier clf(model, class_embeddings(bank, model.config.embeddings));
  const auto allowed = label_space_classes(split, space);
  return argmax_over(clf.scores(visual, audio), allowed);
}

}  // namespace ezgzl::avla
