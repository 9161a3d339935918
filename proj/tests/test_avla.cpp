#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ezgzl/avla/checkpoint.hpp"
#include "ezgzl/avla/contrastive.hpp"
#include "ezgzl/avla/fusion.hpp"
#include "ezgzl/avla/similarity.hpp"
#include "ezgzl/avla/train.hpp"
#include "ezgzl/numerics/gradcheck.hpp"
#include "ezgzl/synth/generate.hpp"
#include "test_util.hpp"

using namespace ezgzl;
using namespace ezgzl::avla;

namespace {

constexpr double kTol = 1e-4;

FusionArch mini_arch() { return {5, 3, 2, 4, 1}; }

std::vector<double> concat(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void perturb_params(FusionModel& m, Rng& rng) {
  // Randomize norms and biases too, so no coordinate sits at its initial value.
  FusionModel::visit(m, [&](Tensor2& t) {
    for (double& x : t.data()) x += 0.2 * rng.normal();
  });
}

double fusion_objective(const FusionModel& m, std::span<const double> v, std::span<const double> a, const Tensor2& r) {
  const Tensor2 tokens = fuse_audio_visual(m, v, a);
  return dot(tokens.data(), r.data());
}

const HeadKind kAllKinds[] = {HeadKind::cosine, HeadKind::linear, HeadKind::mlp, HeadKind::cross_attention};

}  // namespace

TEST(Fusion, OutputShape) {
  Rng rng(1);
  const FusionModel m = FusionModel::initialized({512, 128, 8, 64, 1}, rng);
  const auto v = testutil::random_tensor(rng, 1, 512);
  const auto a = testutil::random_tensor(rng, 1, 128);
  const Tensor2 out = fuse_audio_visual(m, v.row(0), a.row(0));
  EXPECT_EQ(out.rows(), 2u);
  EXPECT_EQ(out.cols(), 512u);
}

TEST(Fusion, ZeroLayersWithIdentityProjectionsIsIdentity) {
  FusionModel m = FusionModel::zeros({4, 4, 2, 2, 0});
  for (std::size_t i = 0; i < 4; ++i) {
    m.visual_proj.weight(i, i) = 1.0;
    m.audio_proj.weight(i, i) = 1.0;
  }
  const std::vector<double> v{0.1, -0.2, 0.3, 0.4}, a{1.0, 2.0, -3.0, 0.5};
  const Tensor2 out = fuse_audio_visual(m, v, a);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(out(0, j), v[j]);
    EXPECT_EQ(out(1, j), a[j]);
  }
}

TEST(Fusion, DimensionMismatchThrows) {
  Rng rng(2);
  const FusionModel m = FusionModel::initialized(mini_arch(), rng);
  const std::vector<double> v(4, 0.1), a(3, 0.1);
  EXPECT_THROW(fuse_audio_visual(m, v, a), DimensionError);
}

TEST(Fusion, ParameterCountFixedByShapes) {
  Rng rng(3);
  const FusionModel m = FusionModel::initialized({6, 4, 2, 4, 2}, rng);
  const std::size_t dm = 8;
  const std::size_t stream = 4 * (dm * dm + dm) + 2 * (2 * dm) + (dm * 4 * dm + 4 * dm) + (4 * dm * dm + dm);
  EXPECT_EQ(param_count(m), (6 * dm + dm) + (4 * dm + dm) + 2 * 2 * stream);
}

TEST(Fusion, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    FusionModel m = FusionModel::initialized(mini_arch(), rng);
    perturb_params(m, rng);
    const auto v = testutil::random_tensor(rng, 1, 5);
    const auto a = testutil::random_tensor(rng, 1, 3);
    const auto r = testutil::random_tensor(rng, 2, 8);

    FusionCache cache;
    fuse_audio_visual(m, v.row(0), a.row(0), &cache);
    FusionModel grad = FusionModel::zeros(m.arch);
    fuse_audio_visual_backward(m, cache, r, grad);

    FusionModel probe = m;
    auto f = [&](std::span<const double> p) {
      assign_params(probe, p);
      return fusion_objective(probe, v.row(0), a.row(0), r);
    };
    const auto report = finite_diff_check(f, flatten_params(grad), flatten_params(m));
    EXPECT_TRUE(report.passes(kTol)) << "seed " << seed << " err " << report.max_relative_error << " at "
                                     << report.worst_coordinate;
  }
}

TEST(Fusion, TwoLayerGradientMatchesFiniteDifferences) {
  Rng rng(7);
  FusionModel m = FusionModel::initialized({5, 3, 2, 4, 2}, rng);
  perturb_params(m, rng);
  const auto v = testutil::random_tensor(rng, 1, 5);
  const auto a = testutil::random_tensor(rng, 1, 3);
  const auto r = testutil::random_tensor(rng, 2, 8);
  FusionCache cache;
  fuse_audio_visual(m, v.row(0), a.row(0), &cache);
  FusionModel grad = FusionModel::zeros(m.arch);
  fuse_audio_visual_backward(m, cache, r, grad);
  FusionModel probe = m;
  auto f = [&](std::span<const double> p) {
    assign_params(probe, p);
    return fusion_objective(probe, v.row(0), a.row(0), r);
  };
  EXPECT_TRUE(finite_diff_check(f, flatten_params(grad), flatten_params(m)).passes(kTol));
}

class HeadGradient : public ::testing::TestWithParam<std::tuple<HeadKind, std::size_t>> {};

TEST_P(HeadGradient, MatchesFiniteDifferences) {
  const auto [kind, class_dim] = GetParam();
  const std::size_t dm = 8, classes = 5, tokens_n = 2;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(500 + seed);
    SimilarityHead head = SimilarityHead::initialized(kind, class_dim, dm, 2, rng);
    SimilarityHead::visit(head, [&](Tensor2& t) {
      for (double& x : t.data()) x += 0.1 * rng.normal();
    });
    const Tensor2 tokens = testutil::random_tensor(rng, tokens_n, dm);
    const Tensor2 classes_emb = testutil::random_unit_rows(rng, classes, class_dim);
    const std::vector<double> r = testutil::random_tensor(rng, 1, classes).values();

    const ClassContext ctx = prepare_classes(head, classes_emb);
    ScoreCache sc;
    similarity_scores(head, tokens, ctx, &sc);
    SimilarityHead grad = SimilarityHead::zeros(kind, class_dim, dm, 2);
    ClassContextGrad cg = zero_context_grad(ctx);
    const Tensor2 d_tokens = similarity_backward(head, tokens, ctx, sc, r, grad, cg);
    class_context_backward(head, ctx, cg, grad);

    const std::size_t np = param_count(head);
    SimilarityHead probe = head;
    auto f = [&](std::span<const double> p) {
      assign_params(probe, p.first(np));
      const Tensor2 tk(tokens_n, dm, std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(np), p.end()));
      const auto s = similarity_scores(probe, tk, classes_emb);
      return dot(s, r);
    };
    const auto point = concat(flatten_params(head), tokens.values());
    const auto analytic = concat(flatten_params(grad), d_tokens.values());
    const auto report = finite_diff_check(f, analytic, point);
    EXPECT_TRUE(report.passes(kTol)) << to_string(kind) << " class_dim " << class_dim << " seed " << seed << " err "
                                     << report.max_relative_error << " at " << report.worst_coordinate;
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, HeadGradient,
                         ::testing::Combine(::testing::ValuesIn(kAllKinds), ::testing::Values(std::size_t{6},
                                                                                             std::size_t{8})));

TEST(Similarity, CosineScoresOneForMatchingClassAndItIsTheMax) {
  Rng rng(11);
  const Tensor2 classes = testutil::random_unit_rows(rng, 6, 4);
  const SimilarityHead head = SimilarityHead::zeros(HeadKind::cosine, 4, 4, 1);
  Tensor2 tokens(2, 4);
  for (std::size_t j = 0; j < 4; ++j) {
    tokens(0, j) = 2.0 * classes(3, j) + 0.5;
    tokens(1, j) = -0.5;
  }
  const auto s = similarity_scores(head, tokens, classes);
  EXPECT_NEAR(s[3], 1.0, 1e-12);
  EXPECT_EQ(static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin()), 3u);
}

TEST(Similarity, CrossAttentionWithSingleTokenIgnoresQuery) {
  Rng rng(12);
  const SimilarityHead head = SimilarityHead::initialized(HeadKind::cross_attention, 8, 8, 2, rng);
  const Tensor2 token = testutil::random_tensor(rng, 1, 8);
  const Tensor2 classes = testutil::random_unit_rows(rng, 4, 8);
  ScoreCache sc;
  const auto s = similarity_scores(head, token, prepare_classes(head, classes), &sc);
  const Tensor2 value = head.attn_value.forward(token);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(sc.attended(c, j), value(0, j), 1e-14);
  for (std::size_t c = 1; c < 4; ++c) EXPECT_NEAR(s[c], s[0], 1e-12);
}

TEST(Similarity, LinearWithZeroWeightsReturnsBias) {
  SimilarityHead head = SimilarityHead::zeros(HeadKind::linear, 8, 8, 2);
  head.linear.bias(0, 0) = 0.75;
  Rng rng(13);
  const auto s = similarity_scores(head, testutil::random_tensor(rng, 2, 8), testutil::random_unit_rows(rng, 5, 8));
  for (double x : s) EXPECT_EQ(x, 0.75);
}

TEST(Similarity, ClassProjectionOnlyWhenWidthsDiffer) {
  Rng rng(14);
  EXPECT_EQ(SimilarityHead::initialized(HeadKind::cosine, 8, 8, 2, rng).class_proj.weight.size(), 0u);
  const auto h = SimilarityHead::initialized(HeadKind::cosine, 6, 8, 2, rng);
  EXPECT_EQ(h.class_proj.weight.rows(), 8u);
  EXPECT_EQ(h.class_proj.weight.cols(), 6u);
}

TEST(Similarity, DimensionMismatchThrows) {
  Rng rng(15);
  const auto head = SimilarityHead::initialized(HeadKind::mlp, 6, 8, 2, rng);
  EXPECT_THROW(similarity_scores(head, testutil::random_tensor(rng, 2, 8), testutil::random_unit_rows(rng, 3, 5)),
               DimensionError);
  EXPECT_THROW(similarity_scores(head, testutil::random_tensor(rng, 2, 7), testutil::random_unit_rows(rng, 3, 6)),
               DimensionError);
}

TEST(Contrastive, AllZeroScoresGiveLogB) {
  const Tensor2 s(64, 64);
  std::vector<std::size_t> t(64);
  for (std::size_t i = 0; i < 64; ++i) t[i] = i % 7;
  EXPECT_NEAR(contrastive_loss(s, t).loss, std::log(64.0), 1e-12);
}

TEST(Contrastive, TwoByTwoSeparated) {
  const Tensor2 s{{10.0, -10.0}, {-10.0, 10.0}};
  const std::vector<std::size_t> t{0, 1};
  EXPECT_NEAR(contrastive_loss(s, t).loss, std::log1p(std::exp(-20.0)), 1e-21);
}

TEST(Contrastive, RowShiftInvarianceAndSoftmaxRows) {
  Rng rng(20);
  const std::size_t b = 16;
  Tensor2 s = testutil::random_tensor(rng, b, b, 3.0);
  std::vector<std::size_t> t(b);
  for (auto& x : t) x = rng.below(5);
  const auto base = contrastive_loss(s, t);
  Tensor2 shifted = s;
  for (std::size_t i = 0; i < b; ++i) {
    const double shift = 100.0 * rng.normal();
    for (double& x : shifted.row(i)) x += shift;
  }
  EXPECT_NEAR(contrastive_loss(shifted, t).loss, base.loss, 1e-10);
  for (std::size_t i = 0; i < b; ++i) {
    double sum = 0.0;
    for (double p : base.softmax.row(i)) sum += p;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Contrastive, GradientMatchesFiniteDifferences) {
  for (bool dedup : {false, true})
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(30 + seed);
      const std::size_t b = 6;
      const Tensor2 s = testutil::random_tensor(rng, b, b, 2.0);
      std::vector<std::size_t> t(b);
      for (auto& x : t) x = rng.below(3);
      const auto r = contrastive_loss(s, t, dedup);
      auto f = [&](std::span<const double> p) {
        return contrastive_loss(Tensor2(b, b, std::vector<double>(p.begin(), p.end())), t, dedup).loss;
      };
      EXPECT_TRUE(finite_diff_check(f, r.grad.values(), s.values()).passes(kTol));
    }
}

TEST(Contrastive, DuplicateClassesStayInDenominatorUnlessDeduplicated) {
  const Tensor2 s(3, 3);
  const std::vector<std::size_t> t{4, 4, 9};
  EXPECT_NEAR(contrastive_loss(s, t).loss, std::log(3.0), 1e-15);
  // Row 0 keeps itself and class 9; row 2 keeps itself and the first class-4 column.
  EXPECT_NEAR(contrastive_loss(s, t, true).loss, std::log(2.0), 1e-15);
}

TEST(Contrastive, RejectsBadInput) {
  const std::vector<std::size_t> t{0, 1};
  EXPECT_THROW(contrastive_loss(Tensor2(2, 3), t), DimensionError);
  EXPECT_THROW(contrastive_loss(Tensor2(3, 3), t), DimensionError);
  Tensor2 s(2, 2);
  s.data()[1] = std::nan("");
  EXPECT_THROW(contrastive_loss(s, t), NumericalError);
}

namespace {

synth::Benchmark tiny_benchmark(std::uint64_t seed) {
  synth::SynthConfig sc;
  sc.n_classes = 6;
  sc.n_seen = 4;
  sc.dim_text = 6;
  sc.dim_visual = 5;
  sc.dim_audio = 3;
  sc.train_per_class = 3;
  sc.val_per_class = 1;
  sc.test_per_class = 2;
  sc.semantic_clusters = 2;
  sc.seed = seed;
  return synth::generate_benchmark(sc);
}

TrainConfig mini_train_config(HeadKind kind) {
  TrainConfig c;
  c.head_kind = kind;
  c.heads = 2;
  c.head_dim = 4;
  c.layers = 1;
  c.batch_size = 5;
  c.epochs = 2;
  c.lr = 1e-2;
  c.embeddings = EmbeddingSource::initial;
  return c;
}

}  // namespace

class BatchGradientCheck : public ::testing::TestWithParam<HeadKind> {};

TEST_P(BatchGradientCheck, FullTrainingGradientMatchesFiniteDifferences) {
  const HeadKind kind = GetParam();
  const auto bm = tiny_benchmark(3);
  const auto train = bm.dataset.indices_in(store::Partition::train);
  const std::vector<std::size_t> batch(train.begin(), train.begin() + 7);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    TrainConfig cfg = mini_train_config(kind);
    cfg.seed = seed;
    cfg.dedup_denominator = seed == 2;
    TrainedModel m = init_model(cfg, 5, 3, 6);
    Rng rng(seed + 77);
    FusionModel::visit(m.fusion, [&](Tensor2& t) {
      for (double& x : t.data()) x += 0.1 * rng.normal();
    });
    const BatchGradient g = batch_gradient(m, bm.dataset, bm.bank.initial(), batch);
    const std::size_t nf = param_count(m.fusion);
    TrainedModel probe = m;
    auto f = [&](std::span<const double> p) {
      assign_params(probe.fusion, p.first(nf));
      assign_params(probe.head, p.subspan(nf));
      return batch_gradient(probe, bm.dataset, bm.bank.initial(), batch).loss;
    };
    const auto report = finite_diff_check(f, concat(flatten_params(g.fusion), flatten_params(g.head)),
                                          concat(flatten_params(m.fusion), flatten_params(m.head)));
    EXPECT_TRUE(report.passes(kTol)) << to_string(kind) << " err " << report.max_relative_error;
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, BatchGradientCheck, ::testing::ValuesIn(kAllKinds));

TEST(Training, BatchGradientIndependentOfWorkerCount) {
  const auto bm = tiny_benchmark(4);
  const auto train = bm.dataset.indices_in(store::Partition::train);
  const TrainedModel m = init_model(mini_train_config(HeadKind::cross_attention), 5, 3, 6);
  const auto one = batch_gradient(m, bm.dataset, bm.bank.initial(), train, 1);
  const auto three = batch_gradient(m, bm.dataset, bm.bank.initial(), train, 3);
  EXPECT_EQ(one.loss, three.loss);
  EXPECT_EQ(flatten_params(one.fusion), flatten_params(three.fusion));
  EXPECT_EQ(flatten_params(one.head), flatten_params(three.head));
}

TEST(Training, FixedSeedIsBitIdenticalAcrossRunsAndWorkers) {
  const auto bm = tiny_benchmark(5);
  const TrainConfig cfg = mini_train_config(HeadKind::mlp);
  const auto a = train_alignment(bm.dataset, bm.bank, cfg, 1);
  const auto b = train_alignment(bm.dataset, bm.bank, cfg, 4);
  EXPECT_EQ(encode_checkpoint(a.model), encode_checkpoint(b.model));
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}

TEST(Training, ClassEmbeddingsStayFrozen) {
  auto bm = tiny_benchmark(6);
  const store::EmbeddingBank bank = bm.bank.with_optimized(bm.bank.initial());
  const auto before = store::encode_embedding_bank(bank);
  TrainConfig cfg = mini_train_config(HeadKind::cross_attention);
  cfg.embeddings = EmbeddingSource::optimized;
  train_alignment(bm.dataset, bank, cfg, 1);
  EXPECT_EQ(store::encode_embedding_bank(bank), before);
}

TEST(Training, RequiresOptimizedEmbeddingsUnlessInitialSelected) {
  const auto bm = tiny_benchmark(7);
  TrainConfig cfg = mini_train_config(HeadKind::linear);
  cfg.embeddings = EmbeddingSource::optimized;
  EXPECT_THROW(train_alignment(bm.dataset, bm.bank, cfg, 1), ValidationError);
}

TEST(Training, SingleClassBatchIsValid) {
  const auto bm = tiny_benchmark(8);
  std::vector<std::size_t> batch;
  for (std::size_t i : bm.dataset.indices_in(store::Partition::train))
    if (bm.dataset.labels()[i] == 0) batch.push_back(i);
  ASSERT_GE(batch.size(), 2u);
  const TrainedModel m = init_model(mini_train_config(HeadKind::cosine), 5, 3, 6);
  const auto g = batch_gradient(m, bm.dataset, bm.bank.initial(), batch);
  // Every column holds the same class, so each row's softmax is uniform.
  EXPECT_NEAR(g.loss, std::log(static_cast<double>(batch.size())), 1e-12);
}

TEST(Training, LossDecreasesOnSyntheticDefaults) {
  std::vector<double> drops;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    synth::SynthConfig sc;
    sc.seed = seed;
    const auto bm = synth::generate_benchmark(sc);
    TrainConfig cfg;
    cfg.heads = 4;
    cfg.head_dim = 8;
    cfg.epochs = 5;
    cfg.lr = 1e-3;
    cfg.seed = seed;
    cfg.embeddings = EmbeddingSource::initial;
    const auto r = train_alignment(bm.dataset, bm.bank, cfg, 1);
    drops.push_back(r.epoch_loss[0] - r.epoch_loss[4]);
  }
  std::sort(drops.begin(), drops.end());
  EXPECT_GT(drops[2], 0.0);
}

TEST(Adam, SingleStepMatchesClosedForm) {
  Tensor2 p{{0.5}};
  const Tensor2 g{{2.0}};
  AdamState st(1, 1, {0.1, 0.9, 0.999, 1e-8, 0.0});
  adam_step(p, g, st);
  // Bias-corrected first step: m_hat = g, v_hat = g^2.
  EXPECT_NEAR(p(0, 0), 0.5 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
}

TEST(Predict, LabelSpaceMaskingAndTieRule) {
  const store::ClassSplit split({0, 1, 2, 3}, {4, 5, 6, 7}, 8);
  const std::vector<double> scores{0.1, 0.9, 0.2, 0.3, 0.5, 0.4, 0.1, 0.5};
  EXPECT_EQ(argmax_over(scores, label_space_classes(split, LabelSpace::all)), 1u);
  EXPECT_EQ(argmax_over(scores, label_space_classes(split, LabelSpace::unseen_only)), 4u);
  EXPECT_EQ(argmax_over(scores, label_space_classes(split, LabelSpace::seen_only)), 1u);

  std::vector<double> tie(8, 0.0);
  tie[3] = tie[7] = 1.0;
  EXPECT_EQ(argmax_over(tie, label_space_classes(split, LabelSpace::all)), 3u);
  const std::vector<std::size_t> reversed{7, 3};
  EXPECT_EQ(argmax_over(tie, reversed), 3u);
  EXPECT_THROW(argmax_over(tie, std::vector<std::size_t>{}), ValidationError);
}

TEST(Predict, InvariantUnderMonotoneTransform) {
  Rng rng(40);
  const store::ClassSplit split({0, 2, 4}, {1, 3, 5, 6}, 7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(7);
    for (double& x : s) x = rng.normal();
    std::vector<double> t(s);
    for (double& x : t) x = std::exp(3.0 * x) - 7.0;
    for (auto space : {LabelSpace::all, LabelSpace::seen_only, LabelSpace::unseen_only})
      EXPECT_EQ(argmax_over(s, label_space_classes(split, space)), argmax_over(t, label_space_classes(split, space)));
  }
}

namespace {

/// Solves A x = b for a small dense system by Gaussian elimination with pivoting.
std::vector<double> solve(Tensor2 a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    for (std::size_t k = 0; k < n; ++k) std::swap(a(c, k), a(piv, k));
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      for (std::size_t k = c; k < n; ++k) a(r, k) -= f * a(c, k);
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= a(r, k) * x[k];
    x[r] = s / a(r, r);
  }
  return x;
}

}  // namespace

TEST(Predict, CosineHeadOnNoiselessDataRecoversEveryClass) {
  synth::SynthConfig sc;
  sc.noise_sigma = 0.0;
  sc.seed = 9;
  const auto bm = synth::generate_benchmark(sc);
  const std::size_t c = sc.n_classes, d = sc.dim_text, dv = sc.dim_visual;

  // With sigma = 0 every sample equals its class prototype. Fit the minimum-norm
  // linear map sending each visual prototype to its class embedding; with zero
  // fusion layers and a zero audio map, the pooled representation is t_c / 2.
  Tensor2 proto(c, dv);
  for (std::size_t i = 0; i < bm.dataset.size(); ++i)
    std::copy_n(bm.dataset.visual().row(i).begin(), dv, proto.row(bm.dataset.labels()[i]).begin());
  const Tensor2 gram = matmul_nt(proto, proto);
  Tensor2 coef(d, c);
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> rhs(c);
    for (std::size_t k = 0; k < c; ++k) rhs[k] = bm.bank.initial()(k, j);
    const auto x = solve(gram, rhs);
    for (std::size_t k = 0; k < c; ++k) coef(j, k) = x[k];
  }
  TrainConfig cfg;
  cfg.head_kind = HeadKind::cosine;
  cfg.layers = 0;
  cfg.heads = 4;
  cfg.head_dim = 8;
  cfg.embeddings = EmbeddingSource::initial;
  TrainedModel m = init_model(cfg, dv, sc.dim_audio, d);
  m.fusion.visual_proj.weight = matmul(coef, proto);
  m.fusion.visual_proj.bias.fill(0.0);
  m.fusion.audio_proj.weight.fill(0.0);
  m.fusion.audio_proj.bias.fill(0.0);

  for (std::size_t i = 0; i < bm.dataset.size(); ++i)
    EXPECT_EQ(predict(m, bm.bank, bm.split, bm.dataset.visual().row(i), bm.dataset.audio().row(i), LabelSpace::all),
              bm.dataset.labels()[i]);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  for (HeadKind kind : kAllKinds) {
    TrainConfig cfg = mini_train_config(kind);
    cfg.seed = 42;
    const TrainedModel m = init_model(cfg, 5, 3, 6);
    const auto bytes = encode_checkpoint(m);
    const TrainedModel back = decode_checkpoint(bytes);
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(flatten_params(back.fusion), flatten_params(m.fusion));
    EXPECT_EQ(flatten_params(back.head), flatten_params(m.head));
    EXPECT_EQ(encode_checkpoint(back), bytes);
  }
}

TEST(Checkpoint, RejectsBadMagicAndDimensionMismatch) {
  const TrainedModel m = init_model(mini_train_config(HeadKind::linear), 5, 3, 6);
  auto bytes = encode_checkpoint(m);
  auto bad = bytes;
  bad[3] = 'X';
  EXPECT_THROW(
      {
        try {
          decode_checkpoint(bad);
        } catch (const FormatError& e) {
          EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
          throw;
        }
      },
      FormatError);
  auto short_bytes = bytes;
  short_bytes.resize(bytes.size() - 8);
  EXPECT_THROW(
      {
        try {
          decode_checkpoint(short_bytes);
        } catch (const FormatError& e) {
          EXPECT_NE(std::string(e.what()).find("dimension mismatch"), std::string::npos);
          throw;
        }
      },
      FormatError);
  // Claiming a wider visual input changes the implied parameter count.
  auto wide = bytes;
  wide[4 + 4 + 4 + 32 + 8 + 1 + 12 + 2] += 1;
  EXPECT_THROW(decode_checkpoint(wide), FormatError);
}
