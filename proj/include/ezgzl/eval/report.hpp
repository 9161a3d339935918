#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ezgzl/avla/train.hpp"
#include "ezgzl/eval/metrics.hpp"
#include "ezgzl/store/digest.hpp"

namespace ezgzl::eval {

struct EvalReport {
  double seen_acc = 0.0;
  double unseen_acc = 0.0;
  double harmonic_mean = 0.0;
  double zsl_acc = 0.0;
  std::vector<std::string> class_names;
  /// Accuracy (percent) of every class with test samples, label space = all.
  std::vector<std::pair<std::string, double>> per_class_acc;
  Tensor2 confusion;
  std::string config_digest;
};

/// Fills S, U, HM and ZSL from the headline accuracies.
inline EvalReport summarize(double seen_acc, double unseen_acc, double zsl_acc) {
  EvalReport r;
  r.seen_acc = seen_acc;
  r.unseen_acc = unseen_acc;
  r.harmonic_mean = harmonic_mean(seen_acc, unseen_acc);
  r.zsl_acc = zsl_acc;
  return r;
}

/// Digest of the settings that produced a model, used when the caller has none.
inline std::string describe(const avla::TrainConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17) << "batch_size=" << c.batch_size << ";epochs=" << c.epochs << ";lr=" << c.lr
     << ";beta1=" << c.beta1 << ";beta2=" << c.beta2 << ";weight_decay=" << c.weight_decay << ";seed=" << c.seed
     << ";head_kind=" << avla::to_string(c.head_kind) << ";layers=" << c.layers << ";heads=" << c.heads
     << ";head_dim=" << c.head_dim << ";embeddings=" << avla::to_string(c.embeddings)
     << ";dedup=" << c.dedup_denominator;
  return os.str();
}

/// GZSL/ZSL evaluation on the test partition. S and U use the full label space,
/// ZSL restricts predictions to unseen classes.
inline EvalReport evaluate(const avla::TrainedModel& model, const store::EmbeddingBank& bank,
                           const store::FeatureDataset& ds, const store::ClassSplit& split, std::string config_digest = {},
                           std::size_t workers = worker_count()) {
  if (split.class_count() != bank.size()) throw ValidationError("class split does not match embedding bank");
  const auto test = ds.indices_in(store::Partition::test);
  if (test.empty()) throw ValidationError("empty test set");
  const avla::Classifier clf(model, avla::class_embeddings(bank, model.config.embeddings));
  const auto all = avla::label_space_classes(split, avla::LabelSpace::all);
  const auto unseen = avla::label_space_classes(split, avla::LabelSpace::unseen_only);

  std::vector<std::size_t> pred_all(test.size()), pred_zsl(test.size(), 0), truth(test.size());
  parallel_tasks(test.size(), workers, [&](std::size_t t) {
    const std::size_t i = test[t];
    const auto scores = clf.scores(ds.visual().row(i), ds.audio().row(i));
    truth[t] = ds.labels()[i];
    pred_all[t] = avla::argmax_over(scores, all);
    if (split.is_unseen(truth[t])) pred_zsl[t] = avla::argmax_over(scores, unseen);
  });

  std::vector<std::size_t> seen_p, seen_t, unseen_p, unseen_t, zsl_p;
  for (std::size_t t = 0; t < test.size(); ++t) {
    if (split.is_seen(truth[t])) {
      seen_p.push_back(pred_all[t]);
      seen_t.push_back(truth[t]);
    } else {
      unseen_p.push_back(pred_all[t]);
      unseen_t.push_back(truth[t]);
      zsl_p.push_back(pred_zsl[t]);
    }
  }
  auto accuracy = [](const std::vector<std::size_t>& p, const std::vector<std::size_t>& t,
                     const std::vector<std::size_t>& subset) { return t.empty() ? 0.0 : mean_class_accuracy(p, t, subset); };
  EvalReport r = summarize(accuracy(seen_p, seen_t, split.seen()), accuracy(unseen_p, unseen_t, split.unseen()),
                           accuracy(zsl_p, unseen_t, split.unseen()));
  r.class_names = bank.class_names();
  r.confusion = confusion_matrix(pred_all, truth, bank.size());
  const ClassTally tl = tally(pred_all, truth, bank.size());
  for (std::size_t c = 0; c < bank.size(); ++c)
    if (tl.total[c] > 0)
      r.per_class_acc.emplace_back(bank.class_names()[c],
                                   100.0 * static_cast<double>(tl.correct[c]) / static_cast<double>(tl.total[c]));
  r.config_digest = config_digest.empty() ? store::fnv1a_hex(describe(model.config)) : std::move(config_digest);
  return r;
}

inline nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["seen_acc"] = r.seen_acc;
  j["unseen_acc"] = r.unseen_acc;
  j["harmonic_mean"] = r.harmonic_mean;
  j["zsl_acc"] = r.zsl_acc;
  j["per_class_acc"] = nlohmann::ordered_json::object();
  for (const auto& [name, acc] : r.per_class_acc) j["per_class_acc"][name] = acc;
  j["classes"] = r.class_names;
  auto& conf = j["confusion"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.confusion.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < r.confusion.cols(); ++k) row.push_back(static_cast<std::uint64_t>(r.confusion(i, k)));
    conf.push_back(std::move(row));
  }
  j["config_digest"] = r.config_digest;
  return j;
}

inline EvalReport report_from_json(const nlohmann::ordered_json& j) {
  try {
    EvalReport r = summarize(j.at("seen_acc").get<double>(), j.at("unseen_acc").get<double>(), j.at("zsl_acc").get<double>());
    r.harmonic_mean = j.at("harmonic_mean").get<double>();
    r.class_names = j.at("classes").get<std::vector<std::string>>();
    for (const auto& [name, acc] : j.at("per_class_acc").items()) r.per_class_acc.emplace_back(name, acc.get<double>());
    const auto& conf = j.at("confusion");
    const std::size_t c = r.class_names.size();
    r.confusion = Tensor2(c, c);
    if (conf.size() != c) throw FormatError("eval report: confusion matrix does not match class count");
    for (std::size_t i = 0; i < c; ++i) {
      if (conf[i].size() != c) throw FormatError("eval report: ragged confusion matrix");
      for (std::size_t k = 0; k < c; ++k) r.confusion(i, k) = conf[i][k].get<double>();
    }
    r.config_digest = j.at("config_digest").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
}

namespace detail {

inline std::string render_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], row[i].size());
    }
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << "  ";
      os << std::setw(static_cast<int>(width[i])) << row[i];
    }
    os << "\n";
  }
  return os.str();
}

inline std::string fixed2(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << x;
  return os.str();
}

}  // namespace detail

/// Seen / Unseen / Harmonic Mean / ZSL, two decimals.
inline std::string report_text(const EvalReport& r) {
  return detail::render_table({{"Seen", "Unseen", "Harmonic Mean", "ZSL"},
                               {detail::fixed2(r.seen_acc), detail::fixed2(r.unseen_acc),
                                detail::fixed2(r.harmonic_mean), detail::fixed2(r.zsl_acc)}});
}

/// Rows are true classes, columns predicted classes (by index; the legend maps
/// indices to names).
inline std::string confusion_text(const EvalReport& r) {
  const std::size_t c = r.confusion.rows();
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"true\\pred"};
  for (std::size_t k = 0; k < c; ++k) header.push_back(std::to_string(k));
  cells.push_back(std::move(header));
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (std::size_t k = 0; k < c; ++k) row.push_back(std::to_string(static_cast<long long>(r.confusion(i, k))));
    cells.push_back(std::move(row));
  }
  std::string out = detail::render_table(cells);
  for (std::size_t i = 0; i < c && i < r.class_names.size(); ++i) out += std::to_string(i) + " = " + r.class_names[i] + "\n";
  return out;
}

}  // namespace ezgzl::eval
