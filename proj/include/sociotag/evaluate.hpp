#pragma once

#include <concepts>
#include <map>
#include <string>
#include <vector>

#include "sociotag/corpus.hpp"
#include "sociotag/error.hpp"

namespace sociotag {

/// Anything that maps a tweet to one tag id per token.
template <typename T>
concept Tagger = requires(const T& t, const Tweet& tw) {
  { t.tag(tw) } -> std::convertible_to<std::vector<int>>;
};

struct AccuracyCounts {
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

template <Tagger M>
AccuracyCounts count_correct(const M& model, const Tweet& tweet) {
  if (!tweet.labeled()) throw UsageError("evaluate: tweet '" + tweet.tweet_id + "' is unlabeled");
  const auto pred = model.tag(tweet);
  if (pred.size() != tweet.size()) throw UsageError("evaluate: tagger returned wrong length");
  AccuracyCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) c.correct += pred[i] == (*tweet.tags)[i] ? 1 : 0;
  c.total = pred.size();
  return c;
}

/// Token accuracy: correct tokens / total tokens.
template <Tagger M>
double evaluate(const M& model, const Corpus& corpus) {
  if (corpus.empty()) throw UsageError("evaluate: empty corpus");
  AccuracyCounts all;
  for (const auto& t : corpus.tweets) {
    const auto c = count_correct(model, t);
    all.correct += c.correct;
    all.total += c.total;
  }
  return all.accuracy();
}

/// Token accuracy pooled over each author's tweets.
template <Tagger M>
std::map<std::string, double> per_author_accuracy(const M& model, const Corpus& corpus) {
  std::map<std::string, AccuracyCounts> counts;
  for (const auto& t : corpus.tweets) {
    const auto c = count_correct(model, t);
    auto& a = counts[t.author_id];
    a.correct += c.correct;
    a.total += c.total;
  }
  std::map<std::string, double> out;
  for (const auto& [author, c] : counts) out.emplace(author, c.accuracy());
  return out;
}

}  // namespace sociotag
