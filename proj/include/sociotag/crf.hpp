#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sociotag/corpus.hpp"
#include "sociotag/error.hpp"
#include "sociotag/evaluate.hpp"
#include "sociotag/log.hpp"
#include "sociotag/numerics.hpp"
#include "sociotag/rng.hpp"
#include "sociotag/text.hpp"

namespace sociotag {

inline constexpr std::string_view kBos = "<S>";
inline constexpr std::string_view kEos = "</S>";
inline constexpr std::size_t kMaxAffix = 4;

/// Lexical feature templates for position i: the word, two words either
/// side (`<S>` / `</S>` past the edges), prefixes and suffixes of length 1-4
/// of those five words, and hyphen / @-mention / hashtag / digit flags on the
/// current word. Offsets are written into the feature name, e.g. `w-1=...`,
/// `p2@+1=...`, `s3@0=...`.
inline std::vector<std::string> extract_crf_features(const Tweet& tweet, std::size_t i) {
  if (i >= tweet.size()) throw UsageError("extract_crf_features: index out of range");
  std::vector<std::string> f;
  f.reserve(48);
  const auto n = static_cast<std::ptrdiff_t>(tweet.size());
  for (int off = -2; off <= 2; ++off) {
    const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + off;
    const std::string pos = off > 0 ? "+" + std::to_string(off) : std::to_string(off);
    if (j < 0 || j >= n) {
      f.push_back("w" + pos + "=" + std::string(j < 0 ? kBos : kEos));
      continue;
    }
    const std::string& w = tweet.tokens[static_cast<std::size_t>(j)].normalized;
    f.push_back("w" + pos + "=" + w);
    const auto chars = text::utf8_chars(w);
    for (std::size_t len = 1; len <= kMaxAffix && len <= chars.size(); ++len) {
      std::string pre, suf;
      for (std::size_t k = 0; k < len; ++k) pre += chars[k];
      for (std::size_t k = chars.size() - len; k < chars.size(); ++k) suf += chars[k];
      f.push_back("p" + std::to_string(len) + "@" + pos + "=" + pre);
      f.push_back("s" + std::to_string(len) + "@" + pos + "=" + suf);
    }
  }
  const Token& cur = tweet.tokens[i];
  if (cur.surface.find('-') != std::string::npos) f.emplace_back("flag=hyphen");
  if (cur.normalized == kMentionToken || is_mention(cur.surface)) f.emplace_back("flag=mention");
  if (cur.surface.size() > 1 && cur.surface[0] == '#') f.emplace_back("flag=hashtag");
  if (std::any_of(cur.surface.begin(), cur.surface.end(),
                  [](char c) { return c >= '0' && c <= '9'; })) {
    f.emplace_back("flag=digit");
  }
  return f;
}

/// Tag-transition scores of a linear-chain CRF, including start and stop.
struct CrfTransitions {
  Mat<double> trans;  // trans(prev, next)
  std::vector<double> start;
  std::vector<double> stop;

  explicit CrfTransitions(std::size_t tags = 0)
      : trans(tags, tags), start(tags, 0.0), stop(tags, 0.0) {}

  std::size_t size() const noexcept { return start.size(); }
};

/// Score of one tag path under emissions (T x L) and transitions.
inline double crf_path_score(const Mat<double>& emissions, const CrfTransitions& tr, const std::vector<int>& path) {
  double s = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    const auto y = static_cast<std::size_t>(path[t]);
    s += emissions(t, y);
    s += t == 0 ? tr.start[y] : tr.trans(static_cast<std::size_t>(path[t - 1]), y);
  }
  s += tr.stop[static_cast<std::size_t>(path.back())];
  return s;
}

namespace detail {

inline Mat<double> crf_forward(const Mat<double>& e, const CrfTransitions& tr) {
  const std::size_t T = e.rows, L = e.cols;
  Mat<double> alpha(T, L);
  for (std::size_t y = 0; y < L; ++y) alpha(0, y) = tr.start[y] + e(0, y);
  std::vector<double> buf(L);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t y = 0; y < L; ++y) {
      for (std::size_t p = 0; p < L; ++p) buf[p] = alpha(t - 1, p) + tr.trans(p, y);
      alpha(t, y) = e(t, y) + log_sum_exp<double>(buf);
    }
  }
  return alpha;
}

inline Mat<double> crf_backward(const Mat<double>& e, const CrfTransitions& tr) {
  const std::size_t T = e.rows, L = e.cols;
  Mat<double> beta(T, L);
  for (std::size_t y = 0; y < L; ++y) beta(T - 1, y) = tr.stop[y];
  std::vector<double> buf(L);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t y = 0; y < L; ++y) {
      for (std::size_t n = 0; n < L; ++n) buf[n] = tr.trans(y, n) + e(t + 1, n) + beta(t + 1, n);
      beta(t, y) = log_sum_exp<double>(buf);
    }
  }
  return beta;
}

inline double crf_log_z(const Mat<double>& alpha, const CrfTransitions& tr) {
  const std::size_t T = alpha.rows, L = alpha.cols;
  std::vector<double> last(L);
  for (std::size_t y = 0; y < L; ++y) last[y] = alpha(T - 1, y) + tr.stop[y];
  return log_sum_exp<double>(last);
}

}  // namespace detail

/// log of the sum over all tag paths of exp(path score), by the forward
/// recursion in log space.
inline double crf_log_partition(const Mat<double>& emissions, const CrfTransitions& tr) {
  if (emissions.rows == 0) throw UsageError("crf_log_partition: empty sequence");
  if (emissions.cols != tr.size()) throw UsageError("crf_log_partition: tag count mismatch");
  return detail::crf_log_z(detail::crf_forward(emissions, tr), tr);
}

/// Highest-scoring tag path. Ties resolve to the lower tag index.
inline std::vector<int> viterbi_decode(const Mat<double>& emissions, const CrfTransitions& tr) {
  const std::size_t T = emissions.rows, L = emissions.cols;
  if (T == 0) throw UsageError("viterbi_decode: empty sequence");
  if (L != tr.size()) throw UsageError("viterbi_decode: tag count mismatch");
  Mat<double> delta(T, L);
  std::vector<std::vector<int>> back(T, std::vector<int>(L, 0));
  for (std::size_t y = 0; y < L; ++y) delta(0, y) = tr.start[y] + emissions(0, y);
  for (std::size_t t = 1; t < T; ++t) {
    for (std::size_t y = 0; y < L; ++y) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (std::size_t p = 0; p < L; ++p) {
        const double s = delta(t - 1, p) + tr.trans(p, y);
        if (s > best) {
          best = s;
          arg = static_cast<int>(p);
        }
      }
      delta(t, y) = best + emissions(t, y);
      back[t][y] = arg;
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  for (std::size_t y = 0; y < L; ++y) {
    const double s = delta(T - 1, y) + tr.stop[y];
    if (s > best) {
      best = s;
      arg = static_cast<int>(y);
    }
  }
  std::vector<int> path(T);
  path[T - 1] = arg;
  for (std::size_t t = T - 1; t > 0; --t) path[t - 1] = back[t][static_cast<std::size_t>(path[t])];
  return path;
}

/// Posterior expectations under the CRF.
struct CrfMarginals {
  double log_z = 0.0;
  Mat<double> node;  // T x L
  Mat<double> edge;  // L x L, summed over positions
};

inline CrfMarginals crf_marginals(const Mat<double>& e, const CrfTransitions& tr) {
  const std::size_t T = e.rows, L = e.cols;
  const auto alpha = detail::crf_forward(e, tr);
  const auto beta = detail::crf_backward(e, tr);
  CrfMarginals m;
  m.log_z = detail::crf_log_z(alpha, tr);
  m.node = Mat<double>(T, L);
  m.edge = Mat<double>(L, L);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t y = 0; y < L; ++y) m.node(t, y) = std::exp(alpha(t, y) + beta(t, y) - m.log_z);
  }
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t p = 0; p < L; ++p) {
      for (std::size_t n = 0; n < L; ++n) {
        m.edge(p, n) += std::exp(alpha(t, p) + tr.trans(p, n) + e(t + 1, n) + beta(t + 1, n) - m.log_z);
      }
    }
  }
  return m;
}

struct CrfConfig {
  int epochs = 10;
  // Early-stopping patience in epochs; only used with a validation corpus.
  int patience = 3;
  double lr = 0.05;
  double l2 = 0.01;
};

struct CrfTrainLog {
  std::vector<double> epoch_nll;
  std::vector<double> valid_accuracy;
  int best_epoch = 0;
};

/// Linear-chain CRF over sparse string features. Emission weights are
/// (feature x tag); transitions carry start and stop scores.
class CrfModel {
 public:
  CrfModel() = default;

  CrfModel(Tagset tagset, std::vector<std::string> features) : tagset_(std::move(tagset)), features_(std::move(features)) {
    for (std::size_t i = 0; i < features_.size(); ++i) index_.emplace(features_[i], static_cast<int>(i));
    const std::size_t L = tagset_.size();
    emission_ = store_.add("crf.emission", std::max<std::size_t>(1, features_.size()), L);
    trans_ = store_.add("crf.transition", L, L);
    start_ = store_.add("crf.start", 1, L);
    stop_ = store_.add("crf.stop", 1, L);
  }

  const Tagset& tagset() const noexcept { return tagset_; }
  std::size_t num_features() const noexcept { return features_.size(); }
  const std::vector<std::string>& features() const noexcept { return features_; }
  ParamStore<double>& params() noexcept { return store_; }
  const ParamStore<double>& params() const noexcept { return store_; }
  ParamId emission_id() const noexcept { return emission_; }

  /// Feature ids per position; features outside the index are dropped.
  std::vector<std::vector<int>> feature_ids(const Tweet& tweet) const {
    std::vector<std::vector<int>> out(tweet.size());
    for (std::size_t i = 0; i < tweet.size(); ++i) {
      for (const auto& f : extract_crf_features(tweet, i)) {
        auto it = index_.find(f);
        if (it != index_.end()) out[i].push_back(it->second);
      }
    }
    return out;
  }

  Mat<double> emissions(const std::vector<std::vector<int>>& ids) const {
    const std::size_t L = tagset_.size();
    const auto& w = store_[emission_];
    Mat<double> e(ids.size(), L);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      for (int f : ids[t]) {
        const auto row = w.row(static_cast<std::size_t>(f));
        for (std::size_t y = 0; y < L; ++y) e(t, y) += row[y];
      }
    }
    return e;
  }

  CrfTransitions transitions() const {
    const std::size_t L = tagset_.size();
    CrfTransitions tr(L);
    tr.trans.data = store_[trans_].value;
    tr.start = store_[start_].value;
    tr.stop = store_[stop_].value;
    return tr;
  }

  std::vector<int> tag(const Tweet& tweet) const {
    if (tweet.size() == 0) return {};
    return viterbi_decode(emissions(feature_ids(tweet)), transitions());
  }

  /// Negative log-likelihood of `gold`; with accumulate=true the gradient is
  /// added to the store.
  double nll(const std::vector<std::vector<int>>& ids, const std::vector<int>& gold, bool accumulate) {
    const auto e = emissions(ids);
    const auto tr = transitions();
    const auto m = crf_marginals(e, tr);
    const double loss = m.log_z - crf_path_score(e, tr, gold);
    if (!accumulate) return loss;
    const std::size_t L = tagset_.size();
    const std::size_t T = ids.size();
    auto& we = store_[emission_];
    for (std::size_t t = 0; t < T; ++t) {
      for (int f : ids[t]) {
        auto g = we.grad_row(static_cast<std::size_t>(f));
        for (std::size_t y = 0; y < L; ++y) g[y] += m.node(t, y);
        g[static_cast<std::size_t>(gold[t])] -= 1.0;
      }
    }
    auto& gt = store_[trans_].grad;
    for (std::size_t i = 0; i < L * L; ++i) gt[i] += m.edge.data[i];
    for (std::size_t t = 1; t < T; ++t) {
      gt[static_cast<std::size_t>(gold[t - 1]) * L + static_cast<std::size_t>(gold[t])] -= 1.0;
    }
    auto& gs = store_[start_].grad;
    auto& ge = store_[stop_].grad;
    for (std::size_t y = 0; y < L; ++y) {
      gs[y] += m.node(0, y);
      ge[y] += m.node(T - 1, y);
    }
    gs[static_cast<std::size_t>(gold.front())] -= 1.0;
    ge[static_cast<std::size_t>(gold.back())] -= 1.0;
    return loss;
  }

  nlohmann::json to_json() const {
    return {{"tagset", tagset_.symbols()}, {"features", features_}, {"arrays", arrays_to_json(store_)}};
  }

  static CrfModel from_json(const nlohmann::json& j) {
    CrfModel m(Tagset(j.at("tagset").get<std::vector<std::string>>()),
               j.at("features").get<std::vector<std::string>>());
    arrays_from_json(m.store_, j.at("arrays"));
    return m;
  }

 private:
  Tagset tagset_;
  std::vector<std::string> features_;
  std::unordered_map<std::string, int> index_;
  ParamStore<double> store_;
  ParamId emission_ = 0, trans_ = 0, start_ = 0, stop_ = 0;
};

/// Adam on L2-regularized NLL, one sentence per step. Emission rows use lazy
/// updates (only rows whose features fire in the sentence, with the L2 term
/// applied to those rows); transitions are updated densely. With a
/// validation corpus the best-accuracy epoch is returned.
inline CrfModel train_crf(const Corpus& train, const Corpus* valid, const CrfConfig& cfg, Rng& rng,
                          CrfTrainLog* log_out = nullptr) {
  if (train.empty()) throw UsageError("train_crf: empty corpus");
  if (!train.labeled()) throw UsageError("train_crf: corpus must be labeled");

  std::vector<std::string> features;
  {
    std::unordered_map<std::string, int> seen;
    for (const auto& t : train.tweets) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        for (auto& f : extract_crf_features(t, i)) {
          if (seen.emplace(f, 0).second) features.push_back(std::move(f));
        }
      }
    }
  }
  CrfModel model(train.tagset, std::move(features));
  std::vector<std::vector<std::vector<int>>> ids;
  ids.reserve(train.size());
  for (const auto& t : train.tweets) ids.push_back(model.feature_ids(t));

  auto& store = model.params();
  auto& emission = store[model.emission_id()];
  const AdamConfig adam{cfg.lr};
  const double l2 = cfg.l2;

  CrfTrainLog log;
  std::optional<ParamStore<double>> best;
  double best_acc = -1.0;
  int since_best = 0;
  if (valid && !valid->empty()) {
    best_acc = evaluate(model, *valid);
    best = store;
    log.valid_accuracy.push_back(best_acc);
  }

  Rng order_rng = rng.child("crf-order");
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::size_t> rows;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double epoch_nll = 0.0;
    for (std::size_t idx : order) {
      const auto& tw = train.tweets[idx];
      if (tw.size() == 0) continue;
      rows.clear();
      for (const auto& pos : ids[idx]) {
        for (int f : pos) rows.push_back(static_cast<std::size_t>(f));
      }
      std::sort(rows.begin(), rows.end());
      rows.erase(std::unique(rows.begin(), rows.end()), rows.end());

      epoch_nll += model.nll(ids[idx], *tw.tags, true);
      for (std::size_t r : rows) {
        auto g = emission.grad_row(r);
        const auto v = emission.row(r);
        for (std::size_t y = 0; y < g.size(); ++y) g[y] += 2.0 * l2 * v[y];
      }
      for (auto& p : store) {
        if (&p == &emission) continue;
        for (std::size_t i = 0; i < p.size(); ++i) p.grad[i] += 2.0 * l2 * p.value[i];
        adam_step_param(p, adam);
        std::fill(p.grad.begin(), p.grad.end(), 0.0);
      }
      adam_step_rows<double>(emission, rows, adam);
      for (std::size_t r : rows) {
        auto g = emission.grad_row(r);
        std::fill(g.begin(), g.end(), 0.0);
      }
    }
    log.epoch_nll.push_back(epoch_nll);
    log::debug("crf epoch ", epoch, " nll ", epoch_nll);

    if (best) {
      const double acc = evaluate(model, *valid);
      log.valid_accuracy.push_back(acc);
      if (acc > best_acc) {
        best_acc = acc;
        best = store;
        log.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    } else {
      log.best_epoch = epoch;
    }
  }
  if (best) store.copy_values_from(*best);
  if (log_out) *log_out = std::move(log);
  return model;
}

}  // namespace sociotag
