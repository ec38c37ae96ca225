#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sociotag/alias.hpp"
#include "sociotag/corpus.hpp"
#include "sociotag/error.hpp"
#include "sociotag/rng.hpp"
#include "sociotag/socialgraph.hpp"
#include "sociotag/text.hpp"

namespace sociotag {

struct NodeEmbedding {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  std::size_t size() const noexcept { return vectors.size(); }
  bool contains(const std::string& author) const { return vectors.count(author) > 0; }

  const std::vector<double>* find(const std::string& author) const {
    auto it = vectors.find(author);
    return it == vectors.end() ? nullptr : &it->second;
  }

  bool operator==(const NodeEmbedding&) const = default;
};

// Embeddings share the word-vector text format, keyed by author id.
inline void save_node_embedding(const NodeEmbedding& emb, const std::string& path) {
  WordVectors wv;
  wv.dim = emb.dim;
  wv.vectors = emb.vectors;
  save_word_vectors(wv, path);
}

inline NodeEmbedding load_node_embedding(const std::string& path) {
  auto wv = load_word_vectors(path);
  return NodeEmbedding{wv.dim, std::move(wv.vectors)};
}

/// FNV-1a over the id-sorted entries, as 16 hex digits. Identifies the
/// frozen embedding a social checkpoint was trained against.
inline std::string embedding_hash(const NodeEmbedding& emb) {
  std::vector<const std::pair<const std::string, std::vector<double>>*> entries;
  for (const auto& e : emb.vectors) entries.push_back(&e);
  std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->first < b->first; });
  std::string buf = std::to_string(emb.dim) + "\n";
  char num[32];
  for (const auto* e : entries) {
    buf += e->first;
    for (double x : e->second) {
      std::snprintf(num, sizeof num, " %.17g", x);
      buf += num;
    }
    buf += '\n';
  }
  return text::hex64(detail::fnv1a(buf));
}

inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw UsageError("cosine_similarity: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

struct LineConfig {
  std::size_t dim = 50;
  int order = 2;
  int negatives = 5;
  // 0 selects max(100 * |E|, 1e5).
  std::uint64_t total_samples = 0;
  double initial_lr = 0.025;
  double noise_power = 0.75;
};

// Mean sampled objective over the first and last 10% of training samples.
struct LineStats {
  std::uint64_t samples = 0;
  double first_decile_loss = 0.0;
  double last_decile_loss = 0.0;
};

namespace detail {

inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// LINE embeddings with negative sampling, learned from graph structure only.
///
/// Each undirected edge contributes both directions. A step draws a directed
/// edge (source, target), then pushes the source vector towards the target's
/// context (order 2) or vertex (order 1) vector and away from `negatives`
/// noise nodes drawn with probability proportional to degree^0.75. The
/// learning rate decays linearly to zero over total_samples steps.
inline NodeEmbedding train_line(const SocialGraph& g, const LineConfig& cfg, Rng& rng,
                                LineStats* stats = nullptr) {
  if (g.num_nodes() == 0 || g.num_edges() == 0) {
    throw DataError("train_line: graph has no edges");
  }
  if (cfg.order != 1 && cfg.order != 2) throw UsageError("train_line: order must be 1 or 2");
  if (cfg.dim == 0) throw UsageError("train_line: dim must be positive");
  if (cfg.negatives < 0) throw UsageError("train_line: negatives must be >= 0");

  const std::size_t n = g.num_nodes();
  const std::size_t dim = cfg.dim;
  const std::uint64_t total =
      cfg.total_samples > 0 ? cfg.total_samples
                            : std::max<std::uint64_t>(100 * g.num_edges(), 100000);

  std::vector<Edge> directed;
  directed.reserve(2 * g.num_edges());
  for (const auto& [u, v] : g.edges()) {
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  const std::vector<double> edge_weights(directed.size(), 1.0);
  const AliasTable edge_table(edge_weights);

  std::vector<double> noise(n);
  for (NodeId i = 0; i < n; ++i) noise[i] = std::pow(static_cast<double>(g.degree(i)), cfg.noise_power);
  const AliasTable noise_table(noise);

  Rng init = rng.child("line-init");
  Rng draw = rng.child("line-sample");

  std::vector<double> vertex(n * dim);
  for (auto& x : vertex) x = (init.uniform() - 0.5) / static_cast<double>(dim);
  std::vector<double> context(n * dim, 0.0);
  std::vector<double>& target_table = cfg.order == 2 ? context : vertex;

  const std::uint64_t decile = std::max<std::uint64_t>(1, total / 10);
  double first_sum = 0.0, last_sum = 0.0;
  std::uint64_t first_n = 0, last_n = 0;

  std::vector<double> err(dim);
  for (std::uint64_t step = 0; step < total; ++step) {
    const double lr = cfg.initial_lr * (1.0 - static_cast<double>(step) / static_cast<double>(total));
    const auto [src, dst] = directed[edge_table.sample(draw)];
    double* u = &vertex[static_cast<std::size_t>(src) * dim];
    std::fill(err.begin(), err.end(), 0.0);
    double loss = 0.0;
    for (int d = 0; d <= cfg.negatives; ++d) {
      const NodeId target = d == 0 ? dst : static_cast<NodeId>(noise_table.sample(draw));
      const double label = d == 0 ? 1.0 : 0.0;
      double* t = &target_table[static_cast<std::size_t>(target) * dim];
      double score = 0.0;
      for (std::size_t k = 0; k < dim; ++k) score += u[k] * t[k];
      loss -= d == 0 ? detail::log_sigmoid(score) : detail::log_sigmoid(-score);
      const double grad = (label - detail::sigmoid(score)) * lr;
      for (std::size_t k = 0; k < dim; ++k) err[k] += grad * t[k];
      for (std::size_t k = 0; k < dim; ++k) t[k] += grad * u[k];
    }
    for (std::size_t k = 0; k < dim; ++k) u[k] += err[k];

    if (step < decile) {
      first_sum += loss;
      ++first_n;
    }
    if (step >= total - decile) {
      last_sum += loss;
      ++last_n;
    }
  }

  if (stats) {
    stats->samples = total;
    stats->first_decile_loss = first_sum / static_cast<double>(first_n);
    stats->last_decile_loss = last_sum / static_cast<double>(last_n);
  }

  NodeEmbedding emb;
  emb.dim = dim;
  for (NodeId i = 0; i < n; ++i) {
    emb.vectors.emplace(g.name(i), std::vector<double>(vertex.begin() + static_cast<std::ptrdiff_t>(i * dim),
                                                       vertex.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim)));
  }
  return emb;
}

}  // namespace sociotag
