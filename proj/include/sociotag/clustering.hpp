#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sociotag/corpus.hpp"
#include "sociotag/error.hpp"
#include "sociotag/node_embed.hpp"
#include "sociotag/rng.hpp"

namespace sociotag {

struct KMeansResult {
  std::vector<int> assignments;
  std::vector<std::vector<double>> centroids;
  // Within-cluster SSE after each assignment step.
  std::vector<double> sse_history;
  int iterations = 0;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Stops when assignments are
/// stable or after max_iters rounds. A cluster that empties is re-seeded at
/// the point farthest from its current centroid. Distance ties go to the
/// lower cluster id.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, Rng& rng,
                           int max_iters = 100) {
  if (k < 1) throw UsageError("kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > points.size()) {
    throw UsageError("kmeans: k exceeds number of points");
  }
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw UsageError("kmeans: points have different lengths");
  }
  const std::size_t n = points.size();

  KMeansResult res;
  // k-means++ seeding.
  res.centroids.push_back(points[rng.index(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = detail::sq_dist(points[i], res.centroids[0]);
  while (res.centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (double x : d2) total += x;
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.index(n);
    } else {
      double r = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        r -= d2[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] <= 0.0) --pick;
    }
    res.centroids.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::sq_dist(points[i], res.centroids.back()));
    }
  }

  res.assignments.assign(n, -1);
  for (int iter = 0; iter < std::max(1, max_iters); ++iter) {
    bool changed = false;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = detail::sq_dist(points[i], res.centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignments[i] != best) changed = true;
      res.assignments[i] = best;
      sse += best_d;
    }
    res.sse_history.push_back(sse);
    res.iterations = iter + 1;
    if (!changed && iter > 0) break;

    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(res.assignments[i]);
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) sums[c][j] += points[i][j];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (counts[c] == 0) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d =
              detail::sq_dist(points[i], res.centroids[static_cast<std::size_t>(res.assignments[i])]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        res.centroids[c] = points[far];
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j) {
        res.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
      }
    }
  }
  return res;
}

struct SplitSpec {
  enum class Provenance { network, random };

  std::set<std::string> train_authors;
  std::set<std::string> test_authors;
  Provenance provenance = Provenance::random;
  std::uint64_t seed = 0;

  bool operator==(const SplitSpec&) const = default;
};

inline const char* to_string(SplitSpec::Provenance p) {
  return p == SplitSpec::Provenance::network ? "network" : "random";
}

inline nlohmann::json to_json(const SplitSpec& s) {
  return nlohmann::json{{"provenance", to_string(s.provenance)},
                        {"seed", s.seed},
                        {"train", std::vector<std::string>(s.train_authors.begin(), s.train_authors.end())},
                        {"test", std::vector<std::string>(s.test_authors.begin(), s.test_authors.end())}};
}

inline SplitSpec split_from_json(const nlohmann::json& j) {
  SplitSpec s;
  const auto prov = j.at("provenance").get<std::string>();
  if (prov == "network") s.provenance = SplitSpec::Provenance::network;
  else if (prov == "random") s.provenance = SplitSpec::Provenance::random;
  else throw DataError("split: unknown provenance '" + prov + "'");
  s.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& a : j.at("train")) s.train_authors.insert(a.get<std::string>());
  for (const auto& a : j.at("test")) s.test_authors.insert(a.get<std::string>());
  for (const auto& a : s.train_authors) {
    if (s.test_authors.count(a)) throw DataError("split: author '" + a + "' on both sides");
  }
  return s;
}

/// Two-way k-means over the embeddings of annotated authors found in the
/// network; the larger cluster trains. Annotated authors missing from the
/// network go to either side with probability 1/2.
inline SplitSpec network_split(const NodeEmbedding& emb, const Corpus& corpus, Rng& rng) {
  SplitSpec split;
  split.provenance = SplitSpec::Provenance::network;
  split.seed = rng.seed();

  std::vector<std::string> present, missing;
  for (const auto& a : corpus.authors()) (emb.contains(a) ? present : missing).push_back(a);
  if (present.empty()) throw DataError("network_split: no annotated author appears in the network");

  Rng cluster_rng = rng.child("kmeans");
  Rng coin = rng.child("missing");
  if (present.size() == 1) {
    split.train_authors.insert(present[0]);
  } else {
    std::vector<std::vector<double>> points;
    points.reserve(present.size());
    for (const auto& a : present) points.push_back(*emb.find(a));
    const auto km = kmeans(points, 2, cluster_rng);
    const auto size0 = std::count(km.assignments.begin(), km.assignments.end(), 0);
    const auto size1 = static_cast<std::ptrdiff_t>(present.size()) - size0;
    const int train_cluster = size0 >= size1 ? 0 : 1;
    for (std::size_t i = 0; i < present.size(); ++i) {
      (km.assignments[i] == train_cluster ? split.train_authors : split.test_authors).insert(present[i]);
    }
  }
  for (const auto& a : missing) {
    (coin.bernoulli(0.5) ? split.train_authors : split.test_authors).insert(a);
  }
  return split;
}

/// Uniformly random partition of the annotated authors with |train| = train_size.
inline SplitSpec random_split(const Corpus& corpus, std::size_t train_size, Rng& rng) {
  auto authors = corpus.authors();
  if (train_size == 0 || train_size >= authors.size()) {
    throw UsageError("random_split: train_size must be in (0, " + std::to_string(authors.size()) + ")");
  }
  SplitSpec split;
  split.provenance = SplitSpec::Provenance::random;
  split.seed = rng.seed();
  rng.shuffle(authors);
  for (std::size_t i = 0; i < authors.size(); ++i) {
    (i < train_size ? split.train_authors : split.test_authors).insert(authors[i]);
  }
  return split;
}

}  // namespace sociotag
