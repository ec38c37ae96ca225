#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sociotag/error.hpp"
#include "sociotag/rng.hpp"

namespace sociotag {

/// Walker's alias method: O(n) construction, O(1) draws from a fixed
/// discrete distribution given by non-negative weights.
class AliasTable {
 public:
  AliasTable() = default;

  explicit AliasTable(std::span<const double> weights) {
    const std::size_t n = weights.size();
    if (n == 0) throw UsageError("AliasTable: no weights");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw UsageError("AliasTable: negative weight");
      total += w;
    }
    if (total <= 0.0) throw UsageError("AliasTable: weights sum to zero");

    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = weights[i] * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      large.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      (scaled[l] < 1.0 ? small : large).push_back(l);
    }
    for (std::size_t i : large) prob_[i] = 1.0;
    for (std::size_t i : small) prob_[i] = 1.0;
  }

  std::size_t size() const noexcept { return prob_.size(); }

  std::size_t sample(Rng& rng) const {
    const std::size_t k = rng.index(prob_.size());
    return rng.uniform() < prob_[k] ? k : alias_[k];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

}  // namespace sociotag
