#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "sociotag/corpus.hpp"
#include "sociotag/error.hpp"
#include "sociotag/rng.hpp"
#include "sociotag/social_attention.hpp"
#include "sociotag/socialgraph.hpp"
#include "sociotag/text.hpp"

namespace sociotag {

// ---------------------------------------------------------------------------
// Assortativity and rewired baselines.

/// Mean squared accuracy difference over edges whose endpoints both have an
/// accuracy. Lower means more assortative.
inline double assortativity(const std::map<std::string, double>& acc, const SocialGraph& g) {
  std::set<std::string> annotated;
  for (const auto& [a, _] : acc) annotated.insert(a);
  const auto pairs = connected_annotated_pairs(g, annotated);
  if (pairs.empty()) throw DataError("assortativity: no edge joins two authors with an accuracy");
  double sum = 0.0;
  for (const auto& [a, b] : pairs) {
    const double d = acc.at(a) - acc.at(b);
    sum += d * d;
  }
  return sum / static_cast<double>(pairs.size());
}

using GraphMetric = std::function<double(const SocialGraph&)>;

struct RewiredComparison {
  double observed = 0.0;
  std::vector<double> rewired_samples;
  int epochs_per_sample = 0;
  double empirical_p = 1.0;

  double mean() const {
    if (rewired_samples.empty()) return 0.0;
    double s = 0.0;
    for (double x : rewired_samples) s += x;
    return s / static_cast<double>(rewired_samples.size());
  }

  /// Sample standard deviation (n - 1 denominator).
  double stddev() const {
    const std::size_t n = rewired_samples.size();
    if (n < 2) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double x : rewired_samples) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(n - 1));
  }

  nlohmann::json to_json() const {
    return {{"observed", observed},       {"rewired_samples", rewired_samples}, {"rewired_mean", mean()},
            {"rewired_std", stddev()},    {"epochs_per_sample", epochs_per_sample},
            {"empirical_p", empirical_p}};
  }
};

/// One-sided permutation p-value for a lower-is-assortative metric.
inline double empirical_p_value(double observed, const std::vector<double>& samples) {
  std::size_t le = 0;
  for (double s : samples) le += s <= observed ? 1 : 0;
  return static_cast<double>(1 + le) / static_cast<double>(1 + samples.size());
}

namespace detail {

// Runs f(s) for s in [0, n) on up to `workers` threads. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (w <= 1) {
    for (std::size_t s = 0; s < n; ++s) f(s);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t t = 0; t < w; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (std::size_t s = t; s < n; s += w) f(s);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Metric on the observed graph and on n_samples independent rewirings of
/// it. Sample s draws from rng.child("rewire", s), so results do not depend
/// on the worker count.
inline RewiredComparison rewired_baseline(const GraphMetric& metric, const SocialGraph& g, int epochs = 10,
                                          int n_samples = 20, const Rng& rng = Rng(0), int workers = 1) {
  if (n_samples < 1) throw UsageError("rewired_baseline: n_samples must be >= 1");
  if (epochs < 1) throw UsageError("rewired_baseline: epochs must be >= 1");
  RewiredComparison out;
  out.epochs_per_sample = epochs;
  out.observed = metric(g);
  out.rewired_samples.assign(static_cast<std::size_t>(n_samples), 0.0);
  detail::parallel_for(static_cast<std::size_t>(n_samples), workers, [&](std::size_t s) {
    Rng r = rng.child("rewire", s);
    out.rewired_samples[s] = metric(rewire_epochs(g, epochs, r));
  });
  out.empirical_p = empirical_p_value(out.observed, out.rewired_samples);
  return out;
}

struct SweepPoint {
  int epoch = 0;
  double observed = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Rewiring sweep: each of n_samples chains is rewired one epoch at a time
/// (cumulatively) and the metric recorded after every epoch 1..max_epochs.
inline std::vector<SweepPoint> rewiring_sweep(const GraphMetric& metric, const SocialGraph& g, int max_epochs,
                                              int n_samples, const Rng& rng, int workers = 1) {
  if (max_epochs < 1 || n_samples < 1) throw UsageError("rewiring_sweep: epochs and samples must be >= 1");
  const double observed = metric(g);
  const auto E = static_cast<std::size_t>(max_epochs);
  std::vector<std::vector<double>> values(static_cast<std::size_t>(n_samples), std::vector<double>(E));
  detail::parallel_for(values.size(), workers, [&](std::size_t s) {
    Rng r = rng.child("rewire", s);
    SocialGraph cur = g;
    for (std::size_t e = 0; e < E; ++e) {
      cur = rewire_epochs(cur, 1, r);
      values[s][e] = metric(cur);
    }
  });
  std::vector<SweepPoint> out;
  for (std::size_t e = 0; e < E; ++e) {
    RewiredComparison c;
    for (const auto& v : values) c.rewired_samples.push_back(v[e]);
    out.push_back({static_cast<int>(e + 1), observed, c.mean(), c.stddev()});
  }
  return out;
}

inline void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& path) {
  auto out = text::open_output(path);
  out << "epoch,observed,mean,std\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", p.epoch, p.observed, p.mean, p.stddev);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Attention similarity.

/// Mean over connected pairs of Σ_k |π_i,k - π_j,k|, over authors present in `pi`.
inline double attention_similarity(const std::map<std::string, std::vector<double>>& pi, const SocialGraph& g) {
  std::set<std::string> authors;
  for (const auto& [a, _] : pi) authors.insert(a);
  const auto pairs = connected_annotated_pairs(g, authors);
  if (pairs.empty()) throw DataError("attention_similarity: no connected pair of eligible authors");
  double sum = 0.0;
  for (const auto& [a, b] : pairs) {
    const auto& u = pi.at(a);
    const auto& v = pi.at(b);
    for (std::size_t k = 0; k < u.size(); ++k) sum += std::abs(u[k] - v[k]);
  }
  return sum / static_cast<double>(pairs.size());
}

/// Attention vectors of the embedded authors among `authors` (all graph
/// nodes when absent). Authors on the fallback vector are left out.
template <typename Real>
std::map<std::string, std::vector<double>> embedded_attention(const SocialAttentionModel<Real>& model,
                                                              const SocialGraph& g,
                                                              const std::optional<std::set<std::string>>& authors = {}) {
  std::map<std::string, std::vector<double>> pi;
  const auto consider = [&](const std::string& a) {
    if (model.embedded(a)) pi.emplace(a, attention_weights(model, a));
  };
  if (authors) {
    for (const auto& a : *authors) consider(a);
  } else {
    for (const auto& a : g.nodes()) consider(a);
  }
  return pi;
}

template <typename Real>
double attention_similarity(const SocialAttentionModel<Real>& model, const SocialGraph& g,
                            const std::optional<std::set<std::string>>& authors = {}) {
  return attention_similarity(embedded_attention(model, g, authors), g);
}

// ---------------------------------------------------------------------------
// Planted benchmark.

struct PlantedGraph {
  SocialGraph graph;
  std::map<std::string, int> communities;
};

inline std::string planted_node_name(std::size_t i, std::size_t n) {
  const auto width = std::max<std::size_t>(3, std::to_string(n > 0 ? n - 1 : 0).size());
  auto digits = std::to_string(i);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "a" + digits;
}

/// Stochastic block model with c contiguous, near-equal blocks.
inline PlantedGraph gen_planted_graph(std::size_t n, int c, double p_in, double p_out, Rng& rng) {
  if (c < 1 || static_cast<std::size_t>(c) > std::max<std::size_t>(n, 1)) {
    throw UsageError("gen_planted_graph: need 1 <= communities <= authors");
  }
  if (!(p_out >= 0.0 && p_out < p_in && p_in <= 1.0)) {
    throw UsageError("gen_planted_graph: need 0 <= p_out < p_in <= 1");
  }
  PlantedGraph out;
  std::vector<std::string> names(n);
  std::vector<int> block(n);
  for (std::size_t i = 0; i < n; ++i) {
    names[i] = planted_node_name(i, n);
    block[i] = static_cast<int>(i * static_cast<std::size_t>(c) / n);
    out.communities.emplace(names[i], block[i]);
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.bernoulli(block[i] == block[j] ? p_in : p_out)) {
        edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
      }
    }
  }
  out.graph = SocialGraph(std::move(names), std::move(edges));
  return out;
}

struct SynthVocabConfig {
  std::size_t words_per_tag = 30;
  std::size_t community_words_per_tag = 10;
  // Probability that a regular token comes from its community's own pool.
  double community_word_rate = 0.2;
  std::size_t ambiguous_words = 40;
  // Probability that a token is an ambiguous word.
  double ambiguous_rate = 0.15;
  std::size_t min_length = 8;
  std::size_t max_length = 16;

  nlohmann::json to_json() const {
    return {{"words_per_tag", words_per_tag},
            {"community_words_per_tag", community_words_per_tag},
            {"community_word_rate", community_word_rate},
            {"ambiguous_words", ambiguous_words},
            {"ambiguous_rate", ambiguous_rate},
            {"min_length", min_length},
            {"max_length", max_length}};
  }

  static SynthVocabConfig from_json(const nlohmann::json& j) {
    SynthVocabConfig c;
    c.words_per_tag = j.value("words_per_tag", c.words_per_tag);
    c.community_words_per_tag = j.value("community_words_per_tag", c.community_words_per_tag);
    c.community_word_rate = j.value("community_word_rate", c.community_word_rate);
    c.ambiguous_words = j.value("ambiguous_words", c.ambiguous_words);
    c.ambiguous_rate = j.value("ambiguous_rate", c.ambiguous_rate);
    c.min_length = j.value("min_length", c.min_length);
    c.max_length = j.value("max_length", c.max_length);
    if (c.words_per_tag == 0 || c.min_length == 0 || c.max_length < c.min_length) {
      throw UsageError("synthetic vocab: bad sizes");
    }
    return c;
  }
};

inline Tagset default_synthetic_tagset() { return Tagset({"N", "V", "A", "R", "D", "P", "O", ","}); }

namespace detail {

inline std::string random_word(Rng& rng, std::set<std::string>& used) {
  for (;;) {
    const std::size_t len = 3 + rng.index(6);
    std::string w(len, 'a');
    for (auto& ch : w) ch = static_cast<char>('a' + rng.index(26));
    if (used.insert(w).second) return w;
  }
}

inline std::size_t sample_discrete(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

inline std::vector<double> random_cdf(std::size_t n, Rng& rng) {
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (auto& c : cdf) {
    const double u = rng.uniform();
    acc += u * u + 0.05;
    c = acc;
  }
  return cdf;
}

}  // namespace detail

/// Corpus whose tag conventions diverge by community. Regular words have one
/// tag; each ambiguous word has an option list of max(2, min(C, |tags|))
/// tags, and community c tags it options[c mod size] with probability
/// `divergence`, otherwise uniformly among the options. Tag sequences follow
/// a seeded Markov chain; an ambiguous token resets the chain state to the
/// tag it received.
inline Corpus gen_homophilous_corpus(const std::map<std::string, int>& communities, const Tagset& tagset,
                                     const SynthVocabConfig& vocab, double divergence, std::size_t tweets_per_author,
                                     Rng& rng) {
  if (!(divergence >= 0.0 && divergence <= 1.0)) throw UsageError("gen_homophilous_corpus: divergence must be in [0, 1]");
  if (tagset.empty()) throw UsageError("gen_homophilous_corpus: empty tagset");
  int n_comm = 0;
  for (const auto& [_, c] : communities) {
    if (c < 0) throw UsageError("gen_homophilous_corpus: negative community id");
    n_comm = std::max(n_comm, c + 1);
  }
  if (divergence > 0.0 && n_comm < 2) throw UsageError("gen_homophilous_corpus: divergence needs >= 2 communities");

  const std::size_t L = tagset.size();
  Rng lex = rng.child("lexicon");
  std::set<std::string> used;
  std::vector<std::vector<std::string>> shared(L);
  for (auto& pool : shared) {
    for (std::size_t i = 0; i < vocab.words_per_tag; ++i) pool.push_back(detail::random_word(lex, used));
  }
  std::vector<std::vector<std::vector<std::string>>> own(static_cast<std::size_t>(n_comm),
                                                         std::vector<std::vector<std::string>>(L));
  for (auto& comm : own) {
    for (auto& pool : comm) {
      for (std::size_t i = 0; i < vocab.community_words_per_tag; ++i) pool.push_back(detail::random_word(lex, used));
    }
  }
  struct Ambiguous {
    std::string word;
    std::vector<int> options;
  };
  const std::size_t n_opts = std::max<std::size_t>(2, std::min<std::size_t>(static_cast<std::size_t>(n_comm), L));
  std::vector<Ambiguous> ambiguous;
  if (L >= 2) {
    for (std::size_t i = 0; i < vocab.ambiguous_words; ++i) {
      std::vector<int> all(L);
      for (std::size_t t = 0; t < L; ++t) all[t] = static_cast<int>(t);
      lex.shuffle(all);
      all.resize(n_opts);
      ambiguous.push_back({detail::random_word(lex, used), all});
    }
  }

  Rng chain = rng.child("chain");
  const auto start = detail::random_cdf(L, chain);
  std::vector<std::vector<double>> trans;
  for (std::size_t t = 0; t < L; ++t) trans.push_back(detail::random_cdf(L, chain));

  Corpus corpus;
  corpus.tagset = tagset;
  Rng text_rng = rng.child("text");
  for (const auto& [author, comm] : communities) {
    const auto c = static_cast<std::size_t>(comm);
    for (std::size_t k = 0; k < tweets_per_author; ++k) {
      Tweet tw;
      tw.author_id = author;
      tw.tweet_id = author + "-" + std::to_string(k);
      std::vector<int> tags;
      const std::size_t len = vocab.min_length + text_rng.index(vocab.max_length - vocab.min_length + 1);
      std::size_t state = detail::sample_discrete(start, text_rng);
      for (std::size_t i = 0; i < len; ++i) {
        if (i > 0) state = detail::sample_discrete(trans[state], text_rng);
        if (!ambiguous.empty() && text_rng.bernoulli(vocab.ambiguous_rate)) {
          const auto& a = ambiguous[text_rng.index(ambiguous.size())];
          const int tag = text_rng.bernoulli(divergence) ? a.options[c % a.options.size()]
                                                         : a.options[text_rng.index(a.options.size())];
          tw.tokens.emplace_back(a.word);
          tags.push_back(tag);
          state = static_cast<std::size_t>(tag);
          continue;
        }
        const bool local = vocab.community_words_per_tag > 0 && text_rng.bernoulli(vocab.community_word_rate);
        const auto& pool = local ? own[c][state] : shared[state];
        tw.tokens.emplace_back(pool[text_rng.index(pool.size())]);
        tags.push_back(static_cast<int>(state));
      }
      tw.tags = std::move(tags);
      corpus.tweets.push_back(std::move(tw));
    }
  }
  return corpus;
}

struct SynthConfig {
  std::size_t authors = 200;
  int communities = 2;
  double p_in = 0.1;
  double p_out = 0.005;
  double divergence = 0.8;
  std::size_t tweets_per_author = 3;
  SynthVocabConfig vocab;
  std::vector<std::string> tagset = default_synthetic_tagset().symbols();

  nlohmann::json to_json() const {
    return {{"authors", authors},
            {"communities", communities},
            {"p_in", p_in},
            {"p_out", p_out},
            {"divergence", divergence},
            {"tweets_per_author", tweets_per_author},
            {"vocab", vocab.to_json()},
            {"tagset", tagset}};
  }

  static SynthConfig from_json(const nlohmann::json& j) {
    SynthConfig c;
    c.authors = j.value("authors", c.authors);
    c.communities = j.value("communities", c.communities);
    c.p_in = j.value("p_in", c.p_in);
    c.p_out = j.value("p_out", c.p_out);
    c.divergence = j.value("divergence", c.divergence);
    c.tweets_per_author = j.value("tweets_per_author", c.tweets_per_author);
    if (j.contains("vocab")) c.vocab = SynthVocabConfig::from_json(j.at("vocab"));
    c.tagset = j.value("tagset", c.tagset);
    return c;
  }
};

struct SyntheticBenchmark {
  SocialGraph graph;
  std::map<std::string, int> communities;
  Corpus corpus;
  SynthConfig config;
  std::uint64_t seed = 0;

  /// Authors of community c, sorted.
  std::set<std::string> community(int c) const {
    std::set<std::string> out;
    for (const auto& [a, k] : communities) {
      if (k == c) out.insert(a);
    }
    return out;
  }
};

/// Planted graph plus homophilous corpus; a pure function of (config, rng).
inline SyntheticBenchmark generate_benchmark(const SynthConfig& cfg, const Rng& rng) {
  SyntheticBenchmark b;
  b.config = cfg;
  b.seed = rng.seed();
  Rng graph_rng = rng.child("graph");
  auto planted = gen_planted_graph(cfg.authors, cfg.communities, cfg.p_in, cfg.p_out, graph_rng);
  b.graph = std::move(planted.graph);
  b.communities = std::move(planted.communities);
  Rng corpus_rng = rng.child("corpus");
  b.corpus = gen_homophilous_corpus(b.communities, Tagset(cfg.tagset), cfg.vocab, cfg.divergence,
                                    cfg.tweets_per_author, corpus_rng);
  return b;
}

}  // namespace sociotag
