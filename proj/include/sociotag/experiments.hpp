#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sociotag/analysis.hpp"
#include "sociotag/clustering.hpp"
#include "sociotag/crf.hpp"
#include "sociotag/evaluate.hpp"
#include "sociotag/naive.hpp"
#include "sociotag/node_embed.hpp"
#include "sociotag/social_attention.hpp"

// End-to-end runs on a planted benchmark, shared by the CLI and the
// acceptance suite.
namespace sociotag {

inline nlohmann::json to_json(const LineConfig& c) {
  return {{"dim", c.dim},
          {"order", c.order},
          {"negatives", c.negatives},
          {"total_samples", c.total_samples},
          {"initial_lr", c.initial_lr},
          {"noise_power", c.noise_power}};
}

inline LineConfig line_config_from_json(const nlohmann::json& j) {
  LineConfig c;
  c.dim = j.value("dim", c.dim);
  c.order = j.value("order", c.order);
  c.negatives = j.value("negatives", c.negatives);
  c.total_samples = j.value("total_samples", c.total_samples);
  c.initial_lr = j.value("initial_lr", c.initial_lr);
  c.noise_power = j.value("noise_power", c.noise_power);
  return c;
}

inline nlohmann::json to_json(const CrfConfig& c) {
  return {{"epochs", c.epochs}, {"patience", c.patience}, {"lr", c.lr}, {"l2", c.l2}};
}

inline CrfConfig crf_config_from_json(const nlohmann::json& j) {
  CrfConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.lr = j.value("lr", c.lr);
  c.l2 = j.value("l2", c.l2);
  return c;
}

/// Naive tagger trained on community `train_community`, scored per author
/// over the whole corpus; assortativity of those accuracies against
/// rewired copies of the graph.
struct AssortativityRun {
  std::map<std::string, double> accuracy;
  RewiredComparison comparison;
};

inline AssortativityRun assortativity_experiment(const SyntheticBenchmark& b, int epochs, int samples, const Rng& rng,
                                                 int train_community = 0, int workers = 1) {
  const auto train = b.corpus.subset(b.community(train_community));
  const auto model = train_naive(train);
  AssortativityRun run;
  run.accuracy = per_author_accuracy(model, b.corpus);
  const auto& acc = run.accuracy;
  run.comparison = rewired_baseline([&acc](const SocialGraph& g) { return assortativity(acc, g); }, b.graph, epochs,
                                    samples, rng, workers);
  return run;
}

/// CRF test accuracy on network-aligned splits against random splits with
/// the same number of training authors. Split s re-embeds the graph with
/// rng.child("line", s).
struct SplitGapRun {
  std::vector<double> network_accuracy;
  std::vector<double> random_accuracy;
  std::vector<std::size_t> train_sizes;

  static double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
  double gap() const { return mean(random_accuracy) - mean(network_accuracy); }

  nlohmann::json to_json() const {
    return {{"network_accuracy", network_accuracy},
            {"random_accuracy", random_accuracy},
            {"train_sizes", train_sizes},
            {"network_mean", mean(network_accuracy)},
            {"random_mean", mean(random_accuracy)},
            {"gap", gap()}};
  }
};

inline double crf_split_accuracy(const Corpus& corpus, const SplitSpec& split, const CrfConfig& cfg, Rng rng) {
  const auto train = corpus.subset(split.train_authors);
  const auto test = corpus.subset(split.test_authors);
  const auto model = train_crf(train, nullptr, cfg, rng);
  return evaluate(model, test);
}

inline SplitGapRun split_gap_experiment(const SyntheticBenchmark& b, int n_splits, const LineConfig& line,
                                        const CrfConfig& crf, const Rng& rng) {
  SplitGapRun run;
  for (int s = 0; s < n_splits; ++s) {
    const auto su = static_cast<std::uint64_t>(s);
    Rng line_rng = rng.child("line", su);
    const auto emb = train_line(b.graph, line, line_rng);
    Rng net_rng = rng.child("network-split", su);
    const auto net = network_split(emb, b.corpus, net_rng);
    Rng rand_rng = rng.child("random-split", su);
    const auto rnd = random_split(b.corpus, net.train_authors.size(), rand_rng);
    run.train_sizes.push_back(net.train_authors.size());
    run.network_accuracy.push_back(crf_split_accuracy(b.corpus, net, crf, rng.child("crf-network", su)));
    run.random_accuracy.push_back(crf_split_accuracy(b.corpus, rnd, crf, rng.child("crf-random", su)));
  }
  return run;
}

/// Train/validation partition of tweets: each tweet goes to validation with
/// probability `fraction`.
inline std::pair<Corpus, Corpus> holdout_tweets(const Corpus& corpus, double fraction, Rng rng) {
  std::pair<Corpus, Corpus> out;
  out.first.tagset = corpus.tagset;
  out.second.tagset = corpus.tagset;
  for (const auto& t : corpus.tweets) (rng.bernoulli(fraction) ? out.second : out.first).tweets.push_back(t);
  return out;
}

/// Social attention over LINE embeddings of the benchmark graph, then
/// attention similarity over connected embedded pairs against rewired
/// copies of the graph (attention vectors held fixed).
struct AttentionRun {
  RewiredComparison comparison;
  ExpertUtilization utilization;
  double valid_accuracy = 0.0;
};

template <typename Real = double>
AttentionRun attention_experiment(const SyntheticBenchmark& b, const SocialConfig& cfg, const LineConfig& line,
                                  int epochs, int samples, const Rng& rng, int workers = 1) {
  Rng line_rng = rng.child("line");
  auto emb = std::make_shared<const NodeEmbedding>(train_line(b.graph, line, line_rng));
  const auto [train, valid] = holdout_tweets(b.corpus, 0.1, rng.child("holdout"));
  TrainLog log;
  const auto model = train_social<Real>(train, valid, emb, nullptr, cfg, rng.child("social"), &log);
  AttentionRun run;
  run.valid_accuracy = log.valid_accuracy.empty() ? 0.0 : log.valid_accuracy[static_cast<std::size_t>(log.best_epoch)];
  run.utilization = expert_utilization(model, b.corpus.authors());
  const auto pi = embedded_attention(model, b.graph);
  run.comparison = rewired_baseline([&pi](const SocialGraph& g) { return attention_similarity(pi, g); }, b.graph,
                                    epochs, samples, rng.child("rewire-attention"), workers);
  return run;
}

/// Small basis dimensions for desk-scale synthetic runs.
inline BasisConfig toy_basis_config() {
  BasisConfig c;
  c.char_dim = 8;
  c.char_hidden = 8;
  c.word_dim = 16;
  c.word_hidden = 16;
  c.fc_dim = 16;
  c.epochs = 8;
  c.patience = 3;
  c.lr = 0.01;
  c.surface_features = false;
  c.pretrained = false;
  return c;
}

}  // namespace sociotag
