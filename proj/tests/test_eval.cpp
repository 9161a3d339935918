#include <gtest/gtest.h>

#include "ezgzl/eval/metrics.hpp"
#include "ezgzl/eval/report.hpp"
#include "ezgzl/synth/generate.hpp"

using namespace ezgzl;
using namespace ezgzl::eval;

namespace {

synth::Benchmark tiny_benchmark() {
  synth::SynthConfig cfg;
  cfg.n_classes = 6;
  cfg.n_seen = 4;
  cfg.dim_text = 6;
  cfg.dim_visual = 5;
  cfg.dim_audio = 3;
  cfg.train_per_class = 3;
  cfg.val_per_class = 1;
  cfg.test_per_class = 4;
  cfg.semantic_clusters = 2;
  return synth::generate_benchmark(cfg);
}

avla::TrainConfig tiny_train(avla::HeadKind kind) {
  avla::TrainConfig c;
  c.heads = 2;
  c.head_dim = 2;
  c.head_kind = kind;
  c.embeddings = avla::EmbeddingSource::initial;
  c.epochs = 2;
  c.batch_size = 4;
  return c;
}

}  // namespace

TEST(Metrics, HarmonicMean) {
  EXPECT_DOUBLE_EQ(harmonic_mean(60.0, 40.0), 48.0);
  EXPECT_EQ(harmonic_mean(0.0, 0.0), 0.0);
  EXPECT_EQ(harmonic_mean(100.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(harmonic_mean(30.0, 30.0), 30.0);
}

TEST(Metrics, MeanClassAccuracyIgnoresImbalance) {
  // Class 0: 9 of 10 right; class 1: 0 of 1 right. Per-sample accuracy would be 81.8.
  std::vector<std::size_t> truth(10, 0), pred(10, 0);
  pred[0] = 1;
  truth.push_back(1);
  pred.push_back(0);
  const std::vector<std::size_t> subset{0, 1};
  EXPECT_DOUBLE_EQ(mean_class_accuracy(pred, truth, subset), 45.0);
}

TEST(Metrics, ClassesWithoutSamplesExcluded) {
  const std::vector<std::size_t> truth{0, 0}, pred{0, 1};
  EXPECT_DOUBLE_EQ(mean_class_accuracy(pred, truth, std::vector<std::size_t>{0, 2}), 50.0);
  EXPECT_THROW(mean_class_accuracy(pred, truth, std::vector<std::size_t>{3}), ValidationError);
  EXPECT_THROW(mean_class_accuracy(pred, truth, std::vector<std::size_t>{}), ValidationError);
  EXPECT_THROW(mean_class_accuracy(pred, std::vector<std::size_t>{0}, std::vector<std::size_t>{0}), DimensionError);
}

TEST(Metrics, ConfusionMatrixIndexedTrueThenPredicted) {
  const std::vector<std::size_t> truth{0, 0, 1, 2}, pred{0, 2, 1, 1};
  const Tensor2 m = confusion_matrix(pred, truth, 3);
  EXPECT_EQ(m, (Tensor2{{1, 0, 1}, {0, 1, 0}, {0, 1, 0}}));
  EXPECT_THROW(confusion_matrix(std::vector<std::size_t>{3}, std::vector<std::size_t>{0}, 3), ValidationError);
}

TEST(Report, SummaryTableHasFourColumnsTwoDecimals) {
  const EvalReport r = summarize(60.0, 40.0, 55.556);
  EXPECT_DOUBLE_EQ(r.harmonic_mean, 48.0);
  const std::string text = report_text(r);
  EXPECT_NE(text.find("Seen"), std::string::npos);
  EXPECT_NE(text.find("Unseen"), std::string::npos);
  EXPECT_NE(text.find("Harmonic Mean"), std::string::npos);
  EXPECT_NE(text.find("ZSL"), std::string::npos);
  EXPECT_NE(text.find("48.00"), std::string::npos);
  EXPECT_NE(text.find("55.56"), std::string::npos);
}

TEST(Report, EvaluateIsConsistentWithPredictions) {
  const auto b = tiny_benchmark();
  for (auto kind : {avla::HeadKind::cosine, avla::HeadKind::cross_attention}) {
    const auto model = avla::train_alignment(b.dataset, b.bank, tiny_train(kind), 1).model;
    const auto r = evaluate(model, b.bank, b.dataset, b.split, {}, 1);
    EXPECT_DOUBLE_EQ(r.harmonic_mean, harmonic_mean(r.seen_acc, r.unseen_acc));
    // A sample right over all classes is also right over unseen classes only.
    EXPECT_GE(r.zsl_acc, r.unseen_acc);

    const auto test = b.dataset.indices_in(store::Partition::test);
    double total = 0.0;
    for (double x : r.confusion.data()) total += x;
    EXPECT_EQ(total, static_cast<double>(test.size()));
    EXPECT_EQ(r.per_class_acc.size(), 6u);

    std::vector<std::size_t> sp, st;
    for (auto i : test)
      if (b.split.is_seen(b.dataset.labels()[i])) {
        sp.push_back(avla::predict(model, b.bank, b.split, b.dataset.visual().row(i), b.dataset.audio().row(i),
                                   avla::LabelSpace::all));
        st.push_back(b.dataset.labels()[i]);
      }
    EXPECT_DOUBLE_EQ(r.seen_acc, mean_class_accuracy(sp, st, b.split.seen()));
    EXPECT_EQ(r.config_digest, store::fnv1a_hex(describe(model.config)));
  }
}

TEST(Report, WorkerCountDoesNotChangeResult) {
  const auto b = tiny_benchmark();
  const auto model = avla::train_alignment(b.dataset, b.bank, tiny_train(avla::HeadKind::mlp), 1).model;
  const auto a = report_json(evaluate(model, b.bank, b.dataset, b.split, "x", 1));
  const auto c = report_json(evaluate(model, b.bank, b.dataset, b.split, "x", 3));
  EXPECT_EQ(a.dump(), c.dump());
}

TEST(Report, JsonRoundTrip) {
  const auto b = tiny_benchmark();
  const auto model = avla::train_alignment(b.dataset, b.bank, tiny_train(avla::HeadKind::linear), 1).model;
  const auto r = evaluate(model, b.bank, b.dataset, b.split, "abc", 1);
  const auto j = report_json(r);
  EXPECT_EQ(j.begin().key(), "seen_acc");
  const auto back = report_from_json(j);
  EXPECT_EQ(report_json(back).dump(), j.dump());
  EXPECT_EQ(back.config_digest, "abc");
  auto broken = j;
  broken.erase("confusion");
  EXPECT_THROW(report_from_json(broken), FormatError);
}

TEST(Report, ConfusionTextHasLegend) {
  EvalReport r = summarize(0, 0, 0);
  r.class_names = {"cat", "dog"};
  r.confusion = Tensor2{{3, 1}, {0, 4}};
  const std::string text = confusion_text(r);
  EXPECT_NE(text.find("0 = cat"), std::string::npos);
  EXPECT_NE(text.find("1 = dog"), std::string::npos);
}

TEST(Report, EvaluateRejectsMismatchedSplit) {
  const auto b = tiny_benchmark();
  const auto model = avla::init_model(tiny_train(avla::HeadKind::cosine), 5, 3, 6);
  const store::ClassSplit other({0}, {1}, 2);
  EXPECT_THROW(evaluate(model, b.bank, b.dataset, other, {}, 1), ValidationError);
}
