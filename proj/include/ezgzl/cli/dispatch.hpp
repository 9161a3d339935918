#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ezgzl/avla/checkpoint.hpp"
#include "ezgzl/ceo/report.hpp"
#include "ezgzl/cli/config.hpp"
#include "ezgzl/eval/report.hpp"
#include "ezgzl/store/class_split.hpp"
#include "ezgzl/store/feature_dataset.hpp"

namespace ezgzl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

struct Streams {
  std::ostream& out;
  std::ostream& log;
};

namespace detail {

/// Turns leftover "--section.key value" / "--section.key=value" tokens into overrides.
inline std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0) throw ValidationError("unexpected argument '" + tok + "'");
    std::string key = tok.substr(2), value;
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw ValidationError("missing value for --" + key);
      value = extras[++i];
    }
    for (char& ch : key)
      if (ch == '-') ch = '_';
    out.emplace_back(key, value);
  }
  return out;
}

inline std::filesystem::path require_input(const RunConfig& c, const std::string& key, const std::string& value,
                                           const char* default_name) {
  auto p = c.resolve(value, default_name);
  if (!std::filesystem::is_regular_file(p)) throw ValidationError(key + ": file not found: " + p.string());
  return p;
}

inline std::filesystem::path prepare_output(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  return p;
}

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline std::filesystem::path bank_path(const RunConfig& c) { return require_input(c, "paths.bank", c.paths.bank, "bank.ezb"); }

inline std::filesystem::path optimized_bank_path(const RunConfig& c) {
  return require_input(c, "paths.optimized_bank", c.paths.optimized_bank, "bank_optimized.ezb");
}

/// Bank holding the embeddings a model trained with `source` reads.
inline std::filesystem::path bank_for(const RunConfig& c, avla::EmbeddingSource source) {
  return source == avla::EmbeddingSource::optimized ? optimized_bank_path(c) : bank_path(c);
}

}  // namespace detail

inline void run_synth(const RunConfig& c, Streams io) {
  const auto bench = synth::generate_benchmark(c.synth);
  const auto bank = detail::prepare_output(c.resolve(c.paths.bank, "bank.ezb"));
  const auto dataset = detail::prepare_output(c.resolve(c.paths.dataset, "dataset.ezf"));
  const auto split = detail::prepare_output(c.resolve(c.paths.split, "split.json"));
  store::save_embedding_bank(bench.bank, bank);
  store::save_feature_dataset(bench.dataset, bench.bank, dataset);
  store::save_class_split(bench.split, bench.bank, split);
  io.out << "wrote " << bank.string() << ", " << dataset.string() << ", " << split.string() << "\n";
}

inline void run_optimize(const RunConfig& c, Streams io) {
  const auto bank = store::load_embedding_bank(detail::bank_path(c));
  const auto result = ceo::optimize_class_embeddings(bank.initial(), c.ceo);
  const auto trace = detail::prepare_output(c.resolve(c.paths.ceo_trace, "ceo_trace.json"));
  store::write_text_file(trace, detail::dump(ceo::ceo_trace_json(c.ceo, result)));
  if (result.abort_reason) throw NumericalError("optimize: " + *result.abort_reason);
  const auto out = detail::prepare_output(c.resolve(c.paths.optimized_bank, "bank_optimized.ezb"));
  store::save_embedding_bank(bank.with_optimized(result.optimized), out);
  io.out << "min pairwise distance " << result.min_pairwise_distance_before << " -> "
         << result.min_pairwise_distance_after << ", kendall tau " << result.kendall_tau << "\n";
  io.out << "wrote " << out.string() << ", " << trace.string() << "\n";
}

inline void run_train(const RunConfig& c, Streams io) {
  const auto bank = store::load_embedding_bank(detail::bank_for(c, c.train.embeddings));
  const auto split = store::load_class_split(detail::require_input(c, "paths.split", c.paths.split, "split.json"), bank);
  const auto ds =
      store::load_feature_dataset(detail::require_input(c, "paths.dataset", c.paths.dataset, "dataset.ezf"), bank, split);
  const auto result = avla::train_alignment(ds, bank, c.train);
  const auto ckpt = detail::prepare_output(c.resolve(c.paths.checkpoint, "model.ezm"));
  const auto curve = detail::prepare_output(c.resolve(c.paths.loss_curve, "loss_curve.json"));
  avla::save_checkpoint(result.model, ckpt);
  nlohmann::ordered_json j;
  j["epoch_loss"] = result.epoch_loss;
  j["config_digest"] = config_digest(c);
  store::write_text_file(curve, detail::dump(j));
  if (!result.epoch_loss.empty())
    io.out << "loss " << result.epoch_loss.front() << " -> " << result.epoch_loss.back() << " over "
           << result.epoch_loss.size() << " epochs\n";
  io.out << "wrote " << ckpt.string() << ", " << curve.string() << "\n";
}

inline void run_eval(RunConfig c, Streams io) {
  const auto model = avla::load_checkpoint(detail::require_input(c, "paths.checkpoint", c.paths.checkpoint, "model.ezm"));
  const auto bank = store::load_embedding_bank(detail::bank_for(c, model.config.embeddings));
  const auto split = store::load_class_split(detail::require_input(c, "paths.split", c.paths.split, "split.json"), bank);
  const auto ds =
      store::load_feature_dataset(detail::require_input(c, "paths.dataset", c.paths.dataset, "dataset.ezf"), bank, split);
  // The checkpoint's training settings are the ones that produced these numbers.
  c.train = model.config;
  const auto report = eval::evaluate(model, bank, ds, split, config_digest(c));
  const auto json_path = detail::prepare_output(c.resolve(c.paths.report, "eval_report.json"));
  auto text_path = json_path;
  text_path.replace_extension(".txt");
  const std::string text = eval::report_text(report);
  store::write_text_file(json_path, detail::dump(eval::report_json(report)));
  store::write_text_file(text_path, text + "\n" + eval::confusion_text(report));
  io.out << text;
  io.out << "wrote " << json_path.string() << ", " << text_path.string() << "\n";
}

inline void run_inspect(const RunConfig& c, const std::string& input, Streams io) {
  if (!std::filesystem::is_regular_file(input)) throw ValidationError("input: file not found: " + input);
  const auto bytes = store::read_file(input);
  const std::string head(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(4, bytes.size())));
  if (head == store::kEmbeddingBankMagic) {
    const auto bank = store::decode_embedding_bank(bytes);
    if (!bank.has_optimized()) {
      io.out << bank.size() << " classes, dim " << bank.dim() << ", no optimized embeddings\n";
      for (const auto& n : bank.class_names()) io.out << "  " << n << "\n";
      return;
    }
    const auto rows = ceo::nearest_neighbor_report(bank, c.ceo.metric);
    const auto json_path = detail::prepare_output(std::filesystem::path(c.out_dir) / "nn_report.json");
    const auto text_path = std::filesystem::path(c.out_dir) / "nn_report.txt";
    const std::string text = ceo::neighbor_report_text(rows);
    store::write_text_file(json_path, detail::dump(ceo::neighbor_report_json(rows, c.ceo.metric)));
    store::write_text_file(text_path, text);
    io.out << text;
    return;
  }
  if (head == avla::kCheckpointMagic) {
    const auto m = avla::decode_checkpoint(bytes);
    RunConfig shown = c;
    shown.train = m.config;
    io.out << "model: d_v=" << m.fusion.arch.visual_dim << " d_a=" << m.fusion.arch.audio_dim
           << " d_model=" << m.fusion.arch.model_dim() << " class_dim=" << m.head.class_dim
           << " params=" << (avla::param_count(m.fusion) + avla::param_count(m.head)) << "\n";
    for (const auto& f : schema())
      if (f.key.rfind("train.", 0) == 0) io.out << f.key << " = " << f.show(shown) << "\n";
    return;
  }
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception&) {
    throw FormatError("inspect: unrecognized file format: " + input);
  }
  if (!j.is_object() || !j.contains("seen_acc")) throw FormatError("inspect: unrecognized file format: " + input);
  const auto report = eval::report_from_json(j);
  const std::string confusion = eval::confusion_text(report);
  nlohmann::ordered_json cj;
  cj["classes"] = report.class_names;
  cj["confusion"] = eval::report_json(report)["confusion"];
  const auto json_path = detail::prepare_output(std::filesystem::path(c.out_dir) / "confusion.json");
  store::write_text_file(json_path, detail::dump(cj));
  store::write_text_file(std::filesystem::path(c.out_dir) / "confusion.txt", confusion);
  io.out << eval::report_text(report) << "\n" << confusion;
}

/// Full command line handling; returns the process exit code.
inline int dispatch(const std::vector<std::string>& args, Streams io) {
  CLI::App app{"class embedding optimization and audio-visual alignment for generalized zero-shot learning", "ezgzl"};
  app.require_subcommand(1);
  std::string config_path, out_dir, input;
  std::optional<std::uint64_t> seed;
  std::vector<CLI::App*> subs;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"synth", "generate a synthetic benchmark"},
      {"optimize", "optimize class embeddings"},
      {"train", "train the audio-visual alignment model"},
      {"eval", "evaluate a trained model on the test partition"},
      {"inspect", "summarize an embedding bank, checkpoint or evaluation report"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("--config", config_path, "config file");
    sub->add_option("--seed", seed, "global seed");
    sub->add_option("--out-dir", out_dir, "output directory");
    if (std::string(name) == "inspect") sub->add_option("input", input, "file to inspect")->required();
    subs.push_back(sub);
  }

  if (!args.empty() && !args.front().empty() && args.front()[0] != '-') {
    bool known = false;
    for (const auto& [name, help] : commands) known = known || args.front() == name;
    if (!known) {
      io.log << "error: unknown subcommand '" << args.front() << "'\n" << app.help();
      return kExitValidation;
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    io.out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    io.out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    io.log << "error: " << e.what() << "\n" << app.help();
    return kExitValidation;
  }

  CLI::App* active = nullptr;
  for (auto* s : subs)
    if (s->parsed()) active = s;

  RunConfig cfg;
  try {
    auto overrides = detail::parse_overrides(active->remaining());
    if (seed) overrides.emplace_back("seed", std::to_string(*seed));
    if (!out_dir.empty()) overrides.emplace_back("out_dir", out_dir);
    cfg = load_config(config_path, overrides);
    io.log << "# " << active->get_name() << " effective config\n" << echo_config(cfg);
    const std::string name = active->get_name();
    if (name == "synth") run_synth(cfg, io);
    else if (name == "optimize") run_optimize(cfg, io);
    else if (name == "train") run_train(cfg, io);
    else if (name == "eval") run_eval(cfg, io);
    else run_inspect(cfg, input, io);
  } catch (const ValidationError& e) {
    io.log << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    io.log << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

inline int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, Streams{std::cout, std::cerr});
}

}  // namespace ezgzl::cli
