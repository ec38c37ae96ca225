#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sociotag/corpus.hpp"
#include "sociotag/error.hpp"

namespace sociotag {

/// Most-frequent-tag baseline over normalized words. Unseen words get the
/// majority tag of training hapax legomena.
class NaiveModel {
 public:
  NaiveModel() = default;

  const Tagset& tagset() const noexcept { return tagset_; }
  int unknown_tag() const noexcept { return unknown_tag_; }
  const std::unordered_map<std::string, std::vector<int>>& counts() const noexcept { return counts_; }

  /// Majority tag for a known word; ties go to the earlier tag in the tagset.
  std::optional<int> lookup(const std::string& normalized) const {
    auto it = counts_.find(normalized);
    if (it == counts_.end()) return std::nullopt;
    return argmax(it->second);
  }

  std::vector<int> tag(const Tweet& tweet) const {
    std::vector<int> out;
    out.reserve(tweet.size());
    for (const auto& tok : tweet.tokens) out.push_back(lookup(tok.normalized).value_or(unknown_tag_));
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json words = nlohmann::json::object();
    for (const auto& [w, c] : counts_) words[w] = c;
    return {{"tagset", tagset_.symbols()}, {"unknown_tag", tagset_.symbol(unknown_tag_)}, {"counts", words}};
  }

  static NaiveModel from_json(const nlohmann::json& j) {
    NaiveModel m;
    m.tagset_ = Tagset(j.at("tagset").get<std::vector<std::string>>());
    m.unknown_tag_ = m.tagset_.index(j.at("unknown_tag").get<std::string>());
    for (const auto& [w, c] : j.at("counts").items()) {
      auto v = c.get<std::vector<int>>();
      if (v.size() != m.tagset_.size()) throw DataError("naive model: count row has wrong width");
      m.counts_.emplace(w, std::move(v));
    }
    return m;
  }

  friend NaiveModel train_naive(const Corpus& corpus);

 private:
  static int argmax(const std::vector<int>& c) {
    int best = 0;
    for (std::size_t t = 1; t < c.size(); ++t) {
      if (c[t] > c[static_cast<std::size_t>(best)]) best = static_cast<int>(t);
    }
    return best;
  }

  Tagset tagset_;
  std::unordered_map<std::string, std::vector<int>> counts_;
  int unknown_tag_ = 0;
};

inline NaiveModel train_naive(const Corpus& corpus) {
  if (corpus.empty()) throw UsageError("train_naive: empty corpus");
  if (!corpus.labeled()) throw UsageError("train_naive: corpus must be labeled");
  NaiveModel m;
  m.tagset_ = corpus.tagset;
  const std::size_t L = corpus.tagset.size();
  for (const auto& t : corpus.tweets) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      auto& row = m.counts_[t.tokens[i].normalized];
      if (row.empty()) row.assign(L, 0);
      ++row[static_cast<std::size_t>((*t.tags)[i])];
    }
  }
  std::vector<int> hapax(L, 0);
  for (const auto& [w, row] : m.counts_) {
    int total = 0;
    for (int c : row) total += c;
    if (total == 1) {
      for (std::size_t k = 0; k < L; ++k) hapax[k] += row[k];
    }
  }
  m.unknown_tag_ = NaiveModel::argmax(hapax);
  return m;
}

inline std::vector<int> tag_naive(const NaiveModel& model, const Tweet& tweet) { return model.tag(tweet); }

}  // namespace sociotag
