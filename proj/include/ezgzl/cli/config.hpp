#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ezgzl/avla/train.hpp"
#include "ezgzl/ceo/optimize.hpp"
#include "ezgzl/store/digest.hpp"
#include "ezgzl/synth/generate.hpp"

namespace ezgzl::cli {

/// File locations; an empty value resolves to a fixed name inside out_dir.
struct Paths {
  std::string bank;
  std::string optimized_bank;
  std::string dataset;
  std::string split;
  std::string checkpoint;
  std::string loss_curve;
  std::string ceo_trace;
  std::string report;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "ezgzl_out";
  synth::SynthConfig synth;
  ceo::CeoConfig ceo;
  avla::TrainConfig train;
  Paths paths;

  /// Copies the global seed into every section.
  void propagate_seed() {
    synth.seed = seed;
    ceo.seed = seed;
    train.seed = seed;
  }

  std::filesystem::path resolve(const std::string& value, const char* default_name) const {
    return value.empty() ? std::filesystem::path(out_dir) / default_name : std::filesystem::path(value);
  }
};

namespace detail {

inline std::string quote(const std::string& s) { return "\"" + s + "\""; }

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    if constexpr (std::is_floating_point_v<T>)
      throw ValidationError(key + ": expected a number, got '" + text + "'");
    else
      throw ValidationError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ValidationError(key + ": expected true or false, got '" + text + "'");
}

}  // namespace detail

/// One settable key: how to print its current value and how to assign it.
struct Field {
  std::string key;  // "section.name" or "name" at top level
  std::function<std::string(const RunConfig&)> show;
  std::function<void(RunConfig&, const std::string&)> assign;
};

namespace detail {

template <typename Get>
Field size_field(std::string key, Get get) {
  return {key, [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); },
          [get, key](RunConfig& c, const std::string& v) { get(c) = parse_number<std::size_t>(key, v); }};
}

template <typename Get>
Field double_field(std::string key, Get get) {
  return {key, [get](const RunConfig& c) { return format_double(get(const_cast<RunConfig&>(c))); },
          [get, key](RunConfig& c, const std::string& v) { get(c) = parse_number<double>(key, v); }};
}

template <typename Get>
Field path_field(std::string key, Get get, const char* default_name) {
  return {key, [get, default_name](const RunConfig& c) {
            return quote(c.resolve(get(const_cast<RunConfig&>(c)), default_name).string());
          },
          [get](RunConfig& c, const std::string& v) { get(c) = v; }};
}

template <typename Get>
Field string_field(std::string key, Get get) {
  return {key, [get](const RunConfig& c) { return quote(get(const_cast<RunConfig&>(c))); },
          [get](RunConfig& c, const std::string& v) { get(c) = v; }};
}

/// Enum-valued key with a parser returning optional<E> and a to_string.
template <typename Get, typename Parse>
Field enum_field(std::string key, Get get, Parse parse, std::string choices) {
  return {key, [get](const RunConfig& c) { return quote(std::string(to_string(get(const_cast<RunConfig&>(c))))); },
          [get, parse, key, choices](RunConfig& c, const std::string& v) {
            auto parsed = parse(v);
            if (!parsed) throw ValidationError(key + ": expected one of " + choices + ", got '" + v + "'");
            get(c) = *parsed;
          }};
}

}  // namespace detail

/// Every key accepted in a config file or as a --section.key override, in echo order.
inline const std::vector<Field>& schema() {
  using namespace detail;
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); }});
    f.push_back(string_field("out_dir", [](RunConfig& c) -> std::string& { return c.out_dir; }));

    f.push_back(size_field("synth.n_classes", [](RunConfig& c) -> std::size_t& { return c.synth.n_classes; }));
    f.push_back(size_field("synth.n_seen", [](RunConfig& c) -> std::size_t& { return c.synth.n_seen; }));
    f.push_back(size_field("synth.dim_text", [](RunConfig& c) -> std::size_t& { return c.synth.dim_text; }));
    f.push_back(size_field("synth.dim_visual", [](RunConfig& c) -> std::size_t& { return c.synth.dim_visual; }));
    f.push_back(size_field("synth.dim_audio", [](RunConfig& c) -> std::size_t& { return c.synth.dim_audio; }));
    f.push_back(size_field("synth.train_per_class", [](RunConfig& c) -> std::size_t& { return c.synth.train_per_class; }));
    f.push_back(size_field("synth.val_per_class", [](RunConfig& c) -> std::size_t& { return c.synth.val_per_class; }));
    f.push_back(size_field("synth.test_per_class", [](RunConfig& c) -> std::size_t& { return c.synth.test_per_class; }));
    f.push_back(double_field("synth.noise_sigma", [](RunConfig& c) -> double& { return c.synth.noise_sigma; }));
    f.push_back(size_field("synth.semantic_clusters", [](RunConfig& c) -> std::size_t& { return c.synth.semantic_clusters; }));
    f.push_back(double_field("synth.semantic_spread", [](RunConfig& c) -> double& { return c.synth.semantic_spread; }));

    f.push_back(double_field("ceo.alpha", [](RunConfig& c) -> double& { return c.ceo.alpha; }));
    f.push_back(double_field("ceo.margin", [](RunConfig& c) -> double& { return c.ceo.margin; }));
    f.push_back(enum_field("ceo.sem_loss", [](RunConfig& c) -> ceo::SemanticLoss& { return c.ceo.sem_loss; },
                           ceo::parse_semantic_loss, "rank, proximity"));
    f.push_back(enum_field("ceo.metric", [](RunConfig& c) -> ceo::DistanceMetric& { return c.ceo.metric; },
                           ceo::parse_metric, "cosine, euclidean, manhattan"));
    f.push_back(enum_field("ceo.rank_reduction", [](RunConfig& c) -> ceo::RankReduction& { return c.ceo.rank_reduction; },
                           ceo::parse_rank_reduction, "class_mean, sum"));
    f.push_back(size_field("ceo.steps", [](RunConfig& c) -> std::size_t& { return c.ceo.steps; }));
    f.push_back(double_field("ceo.lr", [](RunConfig& c) -> double& { return c.ceo.lr; }));
    f.push_back({"ceo.triplet_budget",
                 [](const RunConfig& c) {
                   return c.ceo.triplet_budget ? std::to_string(*c.ceo.triplet_budget) : quote("auto");
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "auto")
                     c.ceo.triplet_budget.reset();
                   else
                     c.ceo.triplet_budget = parse_number<std::uint64_t>("ceo.triplet_budget", v);
                 }});
    f.push_back(double_field("ceo.tie_epsilon", [](RunConfig& c) -> double& { return c.ceo.tie_epsilon; }));
    f.push_back(double_field("ceo.zero_dist_epsilon", [](RunConfig& c) -> double& { return c.ceo.zero_dist_epsilon; }));

    f.push_back(size_field("train.batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; }));
    f.push_back(size_field("train.epochs", [](RunConfig& c) -> std::size_t& { return c.train.epochs; }));
    f.push_back(double_field("train.lr", [](RunConfig& c) -> double& { return c.train.lr; }));
    f.push_back(double_field("train.beta1", [](RunConfig& c) -> double& { return c.train.beta1; }));
    f.push_back(double_field("train.beta2", [](RunConfig& c) -> double& { return c.train.beta2; }));
    f.push_back(double_field("train.weight_decay", [](RunConfig& c) -> double& { return c.train.weight_decay; }));
    f.push_back(enum_field("train.head_kind", [](RunConfig& c) -> avla::HeadKind& { return c.train.head_kind; },
                           avla::parse_head_kind, "cosine, linear, mlp, cross_attention"));
    f.push_back(size_field("train.layers", [](RunConfig& c) -> std::size_t& { return c.train.layers; }));
    f.push_back(size_field("train.heads", [](RunConfig& c) -> std::size_t& { return c.train.heads; }));
    f.push_back(size_field("train.head_dim", [](RunConfig& c) -> std::size_t& { return c.train.head_dim; }));
    f.push_back(enum_field("train.embeddings", [](RunConfig& c) -> avla::EmbeddingSource& { return c.train.embeddings; },
                           avla::parse_embedding_source, "optimized, initial"));
    f.push_back({"train.dedup_denominator",
                 [](const RunConfig& c) { return std::string(c.train.dedup_denominator ? "true" : "false"); },
                 [](RunConfig& c, const std::string& v) {
                   c.train.dedup_denominator = parse_bool("train.dedup_denominator", v);
                 }});

    f.push_back(path_field("paths.bank", [](RunConfig& c) -> std::string& { return c.paths.bank; }, "bank.ezb"));
    f.push_back(path_field("paths.optimized_bank", [](RunConfig& c) -> std::string& { return c.paths.optimized_bank; }, "bank_optimized.ezb"));
    f.push_back(path_field("paths.dataset", [](RunConfig& c) -> std::string& { return c.paths.dataset; }, "dataset.ezf"));
    f.push_back(path_field("paths.split", [](RunConfig& c) -> std::string& { return c.paths.split; }, "split.json"));
    f.push_back(path_field("paths.checkpoint", [](RunConfig& c) -> std::string& { return c.paths.checkpoint; }, "model.ezm"));
    f.push_back(path_field("paths.loss_curve", [](RunConfig& c) -> std::string& { return c.paths.loss_curve; }, "loss_curve.json"));
    f.push_back(path_field("paths.ceo_trace", [](RunConfig& c) -> std::string& { return c.paths.ceo_trace; }, "ceo_trace.json"));
    f.push_back(path_field("paths.report", [](RunConfig& c) -> std::string& { return c.paths.report; }, "eval_report.json"));
    return f;
  }();
  return fields;
}

inline const Field* find_field(const std::string& key) {
  for (const auto& f : schema())
    if (f.key == key) return &f;
  return nullptr;
}

/// Assigns one key, rejecting keys outside the schema.
inline void set_value(RunConfig& c, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ValidationError("unknown key '" + key + "'");
  f->assign(c, value);
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Drops a trailing '#' comment that is not inside a quoted string.
inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline std::string unquote(const std::string& where, const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (!v.empty() && (v.front() == '"' || v.back() == '"')) throw ValidationError(where + ": unterminated string");
  return v;
}

}  // namespace detail

/// Parses the sectioned key = value format:
///   # comment
///   seed = 3
///   [ceo]
///   alpha = 0.5
///   sem_loss = "rank"
/// Returns (key, raw value) pairs in file order.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text,
                                                                          const std::string& source = "config") {
  std::vector<std::pair<std::string, std::string>> out;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(where + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ValidationError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
    const std::string name = detail::trim(line.substr(0, eq));
    if (name.empty()) throw ValidationError(where + ": missing key");
    const std::string key = section.empty() ? name : section + "." + name;
    if (seen[key]++) throw ValidationError(where + ": duplicate key '" + key + "'");
    out.emplace_back(key, detail::unquote(where, detail::trim(line.substr(eq + 1))));
  }
  return out;
}

/// Canonical "key = value" listing of every setting, defaults included.
inline std::string echo_config(const RunConfig& c) {
  std::ostringstream os;
  for (const auto& f : schema()) os << f.key << " = " << f.show(c) << "\n";
  return os.str();
}

/// Digest of every setting that influences results; output locations are left out
/// so the same run in another directory reports the same digest.
inline std::string config_digest(const RunConfig& c) {
  std::ostringstream os;
  for (const auto& f : schema())
    if (f.key != "out_dir" && f.key.rfind("paths.", 0) != 0) os << f.key << " = " << f.show(c) << "\n";
  return store::fnv1a_hex(os.str());
}

inline void validate(const RunConfig& c) {
  c.synth.validate();
  c.ceo.validate();
  c.train.validate();
  if (c.out_dir.empty()) throw ValidationError("out_dir must not be empty");
}

/// Loads `path` (when non-empty), applies overrides in order, fills section
/// seeds from the global seed, and validates.
inline RunConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  RunConfig c;
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config file not found: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    for (const auto& [k, v] : parse_config_text(buf.str(), path)) set_value(c, k, v);
  }
  for (const auto& [k, v] : overrides) set_value(c, k, v);
  c.propagate_seed();
  validate(c);
  return c;
}

}  // namespace ezgzl::cli
