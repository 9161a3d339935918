#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ezgzl/store/binary_io.hpp"
#include "ezgzl/store/embedding_bank.hpp"

namespace ezgzl::store {

/// Seen / unseen class indices into an EmbeddingBank. Both lists are sorted.
class ClassSplit {
 public:
  ClassSplit() = default;

  ClassSplit(std::vector<std::size_t> seen, std::vector<std::size_t> unseen, std::size_t class_count)
      : seen_(std::move(seen)), unseen_(std::move(unseen)), is_seen_(class_count, 0), is_unseen_(class_count, 0) {
    if (seen_.empty() || unseen_.empty()) throw ValidationError("class split: seen and unseen must both be non-empty");
    std::sort(seen_.begin(), seen_.end());
    std::sort(unseen_.begin(), unseen_.end());
    for (auto i : seen_) {
      if (i >= class_count) throw ValidationError("class split: seen index out of range");
      if (is_seen_[i]) throw ValidationError("class split: duplicate seen index");
      is_seen_[i] = 1;
    }
    for (auto i : unseen_) {
      if (i >= class_count) throw ValidationError("class split: unseen index out of range");
      if (is_seen_[i]) throw ValidationError("class split: class " + std::to_string(i) + " is both seen and unseen");
      if (is_unseen_[i]) throw ValidationError("class split: duplicate unseen index");
      is_unseen_[i] = 1;
    }
    if (seen_.size() + unseen_.size() != class_count)
      throw ValidationError("class split: seen and unseen must cover every class");
  }

  const std::vector<std::size_t>& seen() const { return seen_; }
  const std::vector<std::size_t>& unseen() const { return unseen_; }
  std::size_t class_count() const { return is_seen_.size(); }
  bool is_seen(std::size_t c) const { return c < is_seen_.size() && is_seen_[c]; }
  bool is_unseen(std::size_t c) const { return c < is_unseen_.size() && is_unseen_[c]; }

  std::vector<std::size_t> all() const {
    std::vector<std::size_t> a(class_count());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = i;
    return a;
  }

  friend bool operator==(const ClassSplit& a, const ClassSplit& b) {
    return a.seen_ == b.seen_ && a.unseen_ == b.unseen_;
  }

 private:
  std::vector<std::size_t> seen_;
  std::vector<std::size_t> unseen_;
  std::vector<char> is_seen_;
  std::vector<char> is_unseen_;
};

/// Split sidecar: {"seen": [names...], "unseen": [names...]} in bank order.
inline std::string encode_class_split(const ClassSplit& split, const EmbeddingBank& bank) {
  nlohmann::ordered_json j;
  j["seen"] = nlohmann::json::array();
  j["unseen"] = nlohmann::json::array();
  for (auto i : split.seen()) j["seen"].push_back(bank.class_names().at(i));
  for (auto i : split.unseen()) j["unseen"].push_back(bank.class_names().at(i));
  return j.dump(2) + "\n";
}

inline ClassSplit decode_class_split(std::string_view text, const EmbeddingBank& bank) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("class split: ") + e.what());
  }
  auto indices = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array()) throw FormatError(std::string("class split: missing array '") + key + "'");
    std::vector<std::size_t> out;
    for (const auto& n : j[key]) {
      if (!n.is_string()) throw FormatError("class split: names must be strings");
      auto idx = bank.index_of(n.get<std::string>());
      if (!idx) throw ValidationError("unknown class name: " + n.get<std::string>());
      out.push_back(*idx);
    }
    return out;
  };
  return ClassSplit(indices("seen"), indices("unseen"), bank.size());
}

inline void save_class_split(const ClassSplit& split, const EmbeddingBank& bank, const std::filesystem::path& path) {
  write_text_file(path, encode_class_split(split, bank));
}

inline ClassSplit load_class_split(const std::filesystem::path& path, const EmbeddingBank& bank) {
  const auto bytes = read_file(path);
  return decode_class_split(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), bank);
}

}  // namespace ezgzl::store
