#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sociotag/corpus.hpp"
#include "sociotag/error.hpp"
#include "sociotag/text.hpp"

namespace sociotag {

/// String interner with id 0 reserved for unknown entries.
class Vocab {
 public:
  static constexpr int kUnk = 0;

  Vocab() : items_{"<UNK>"} {}

  int add(const std::string& s) {
    auto [it, inserted] = index_.try_emplace(s, static_cast<int>(items_.size()));
    if (inserted) items_.push_back(s);
    return it->second;
  }

  int get(const std::string& s) const {
    auto it = index_.find(s);
    return it == index_.end() ? kUnk : it->second;
  }

  std::size_t size() const noexcept { return items_.size(); }
  const std::vector<std::string>& items() const noexcept { return items_; }

  static Vocab from_items(const std::vector<std::string>& items) {
    if (items.empty() || items[0] != "<UNK>") throw DataError("vocab must start with <UNK>");
    Vocab v;
    for (std::size_t i = 1; i < items.size(); ++i) v.add(items[i]);
    return v;
  }

 private:
  std::vector<std::string> items_;
  std::unordered_map<std::string, int> index_;
};

inline constexpr std::size_t kBrownPrefixStep = 2;

/// Surface feature names for position i: Brown-path prefixes of length
/// 2, 4, ..., 16 for the previous, current and next token (`prev:`, `cur:`,
/// `next:`), and one `dict:<name>:<tag>` indicator for every tag listed for
/// the current word in each tag dictionary.
inline std::vector<std::string> surface_feature_names(const Tweet& tweet, std::size_t i,
                                                      const LexicalResources& res) {
  std::vector<std::string> out;
  const auto n = static_cast<std::ptrdiff_t>(tweet.size());
  static constexpr const char* kSlots[] = {"prev:", "cur:", "next:"};
  for (int off = -1; off <= 1; ++off) {
    const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + off;
    if (j < 0 || j >= n) continue;
    const auto* path = res.brown(tweet.tokens[static_cast<std::size_t>(j)].normalized);
    if (!path) continue;
    for (std::size_t len = kBrownPrefixStep; len <= kMaxBrownPath && len <= path->size(); len += kBrownPrefixStep) {
      out.push_back(std::string(kSlots[off + 1]) + path->substr(0, len));
    }
  }
  const auto& word = tweet.tokens[i].normalized;
  for (const auto& dict : res.tag_dicts) {
    if (const auto* entry = dict.find(word)) {
      for (const auto& tc : *entry) out.push_back("dict:" + dict.name + ":" + tc.tag);
    }
  }
  return out;
}

/// Index over surface features observed in training text. Unseen feature
/// names are ignored at encoding time.
class SurfaceFeatureIndex {
 public:
  SurfaceFeatureIndex() = default;

  static SurfaceFeatureIndex build(const Corpus& corpus, const LexicalResources& res) {
    SurfaceFeatureIndex idx;
    for (const auto& t : corpus.tweets) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        for (auto& f : surface_feature_names(t, i, res)) {
          if (idx.index_.try_emplace(f, static_cast<int>(idx.names_.size())).second) {
            idx.names_.push_back(std::move(f));
          }
        }
      }
    }
    return idx;
  }

  static SurfaceFeatureIndex from_names(std::vector<std::string> names) {
    SurfaceFeatureIndex idx;
    for (std::size_t i = 0; i < names.size(); ++i) idx.index_.emplace(names[i], static_cast<int>(i));
    idx.names_ = std::move(names);
    return idx;
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  /// Sorted ids of the active features: the sparse form of the multi-hot vector.
  std::vector<int> encode(const Tweet& tweet, std::size_t i, const LexicalResources& res) const {
    std::vector<int> ids;
    for (const auto& f : surface_feature_names(tweet, i, res)) {
      auto it = index_.find(f);
      if (it != index_.end()) ids.push_back(it->second);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

/// Dense multi-hot vector of the surface features at position i.
inline std::vector<double> extract_surface_features(const Tweet& tweet, std::size_t i, const LexicalResources& res,
                                                    const SurfaceFeatureIndex& index) {
  std::vector<double> v(index.size(), 0.0);
  for (int id : index.encode(tweet, i, res)) v[static_cast<std::size_t>(id)] = 1.0;
  return v;
}

}  // namespace sociotag
