#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sociotag/error.hpp"
#include "sociotag/rng.hpp"
#include "sociotag/text.hpp"

namespace sociotag {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Undirected simple graph over author ids. Edges are stored canonically
/// (first < second) in sorted order, so iteration order is deterministic.
class SocialGraph {
 public:
  SocialGraph() = default;

  SocialGraph(std::vector<std::string> nodes, std::vector<Edge> edges) : nodes_(std::move(nodes)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!index_.emplace(nodes_[i], static_cast<NodeId>(i)).second) {
        throw UsageError("duplicate node '" + nodes_[i] + "'");
      }
    }
    for (auto& [u, v] : edges) {
      if (u >= nodes_.size() || v >= nodes_.size()) throw UsageError("edge endpoint out of range");
      if (u > v) std::swap(u, v);
    }
    std::erase_if(edges, [](const Edge& e) { return e.first == e.second; });
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
    adjacency_.assign(nodes_.size(), {});
    for (const auto& [u, v] : edges_) {
      adjacency_[u].push_back(v);
      adjacency_[v].push_back(u);
    }
    for (auto& a : adjacency_) std::sort(a.begin(), a.end());
  }

  /// Builds a graph from named endpoints; nodes are numbered by first
  /// appearance, then `extra_nodes` not already present are appended.
  static SocialGraph from_named_edges(const std::vector<std::pair<std::string, std::string>>& named,
                                      const std::vector<std::string>& extra_nodes = {}) {
    std::vector<std::string> nodes;
    std::unordered_map<std::string, NodeId> ids;
    const auto intern = [&](const std::string& s) {
      auto [it, inserted] = ids.try_emplace(s, static_cast<NodeId>(nodes.size()));
      if (inserted) nodes.push_back(s);
      return it->second;
    };
    std::vector<Edge> edges;
    edges.reserve(named.size());
    for (const auto& [a, b] : named) {
      const NodeId u = intern(a);
      const NodeId v = intern(b);
      edges.emplace_back(u, v);
    }
    for (const auto& n : extra_nodes) intern(n);
    return SocialGraph(std::move(nodes), std::move(edges));
  }

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::string& name(NodeId id) const { return nodes_.at(id); }
  const std::vector<NodeId>& neighbors(NodeId id) const { return adjacency_.at(id); }
  std::size_t degree(NodeId id) const { return adjacency_.at(id).size(); }

  std::optional<NodeId> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  bool has_edge(NodeId u, NodeId v) const {
    const auto& a = adjacency_.at(u);
    return std::binary_search(a.begin(), a.end(), v);
  }

  /// Same node set, different edges.
  SocialGraph with_edges(std::vector<Edge> edges) const { return SocialGraph(nodes_, std::move(edges)); }

  bool operator==(const SocialGraph& o) const { return nodes_ == o.nodes_ && edges_ == o.edges_; }

 private:
  std::vector<std::string> nodes_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> adjacency_;
};

/// One `a<TAB>b` pair per line; `#` lines are comments. Direction,
/// duplicates and self-loops are discarded.
inline SocialGraph load_edge_list(const std::string& path) {
  auto in = text::open_input(path);
  std::vector<std::pair<std::string, std::string>> named;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = text::split_ws(t);
    if (f.size() != 2) {
      throw DataError(path, lineno, "expected 2 fields, got " + std::to_string(f.size()));
    }
    named.emplace_back(std::string(f[0]), std::string(f[1]));
  }
  return SocialGraph::from_named_edges(named);
}

inline void save_edge_list(const SocialGraph& g, const std::string& path) {
  auto out = text::open_output(path);
  for (const auto& [u, v] : g.edges()) out << g.name(u) << '\t' << g.name(v) << '\n';
}

/// Degrees of all nodes, sorted descending.
inline std::vector<std::size_t> degree_sequence(const SocialGraph& g) {
  std::vector<std::size_t> d(g.num_nodes());
  for (NodeId i = 0; i < g.num_nodes(); ++i) d[i] = g.degree(i);
  std::sort(d.begin(), d.end(), std::greater<>());
  return d;
}

namespace detail {

inline std::uint64_t edge_key(NodeId u, NodeId v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

}  // namespace detail

/// Degree-preserving randomization by double-edge swaps. Each epoch makes
/// exactly |E| attempts; an attempt picks two distinct edges (u,v), (x,y)
/// uniformly, orients the second uniformly, and proposes (u,x), (v,y). Swaps
/// that would create a self-loop or a parallel edge are rejected but still
/// use up an attempt.
inline SocialGraph rewire_epochs(const SocialGraph& g, int epochs, Rng& rng) {
  if (epochs < 1) throw UsageError("rewire_epochs: epochs must be >= 1");
  const std::size_t m = g.num_edges();
  if (m < 2) return g;

  std::vector<Edge> edges = g.edges();
  std::unordered_set<std::uint64_t> present;
  present.reserve(m * 2);
  for (const auto& [u, v] : edges) present.insert(detail::edge_key(u, v));

  for (int e = 0; e < epochs; ++e) {
    for (std::size_t attempt = 0; attempt < m; ++attempt) {
      const std::size_t i = rng.index(m);
      std::size_t j = rng.index(m - 1);
      if (j >= i) ++j;
      auto [u, v] = edges[i];
      auto [x, y] = edges[j];
      if (rng.bernoulli(0.5)) std::swap(x, y);
      if (u == x || v == y) continue;
      const auto k1 = detail::edge_key(u, x);
      const auto k2 = detail::edge_key(v, y);
      if (k1 == k2 || present.count(k1) > 0 || present.count(k2) > 0) continue;
      present.erase(detail::edge_key(u, v));
      present.erase(detail::edge_key(x, y));
      present.insert(k1);
      present.insert(k2);
      edges[i] = {std::min(u, x), std::max(u, x)};
      edges[j] = {std::min(v, y), std::max(v, y)};
    }
  }
  return g.with_edges(std::move(edges));
}

/// Pairs of annotated authors joined by an edge (max_distance 1) or by a
/// path of at most two edges (max_distance 2). Each unordered pair appears
/// once, ordered by node id.
inline std::vector<std::pair<std::string, std::string>> connected_annotated_pairs(
    const SocialGraph& g, const std::set<std::string>& annotated, int max_distance = 1) {
  if (max_distance != 1 && max_distance != 2) {
    throw UsageError("connected_annotated_pairs: max_distance must be 1 or 2");
  }
  std::vector<char> mark(g.num_nodes(), 0);
  for (const auto& a : annotated) {
    if (auto id = g.find(a)) mark[*id] = 1;
  }
  std::vector<std::pair<std::string, std::string>> out;
  if (max_distance == 1) {
    for (const auto& [u, v] : g.edges()) {
      if (mark[u] && mark[v]) out.emplace_back(g.name(u), g.name(v));
    }
    return out;
  }
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (!mark[u]) continue;
    std::set<NodeId> reach;
    for (NodeId v : g.neighbors(u)) {
      if (v > u && mark[v]) reach.insert(v);
      for (NodeId w : g.neighbors(v)) {
        if (w > u && mark[w]) reach.insert(w);
      }
    }
    for (NodeId v : reach) out.emplace_back(g.name(u), g.name(v));
  }
  return out;
}

}  // namespace sociotag
