#pragma once

#include <cmath>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sociotag/basis_tagger.hpp"
#include "sociotag/corpus.hpp"
#include "sociotag/error.hpp"
#include "sociotag/log.hpp"
#include "sociotag/node_embed.hpp"
#include "sociotag/numerics.hpp"
#include "sociotag/rng.hpp"

namespace sociotag {

enum class GateMode { softmax, sigmoid };

inline std::string to_string(GateMode m) { return m == GateMode::softmax ? "softmax" : "sigmoid"; }

inline GateMode parse_gate_mode(const std::string& s) {
  if (s == "softmax") return GateMode::softmax;
  if (s == "sigmoid") return GateMode::sigmoid;
  throw UsageError("unknown gate mode '" + s + "'");
}

/// Default number of experts per network type.
inline int default_experts(const std::string& network) {
  if (network == "retweet") return 4;
  if (network == "follow" || network == "mention") return 3;
  throw UsageError("unknown network type '" + network + "'");
}

struct SocialConfig {
  BasisConfig basis;
  int K = 3;
  GateMode gate = GateMode::softmax;
  bool shared_encoder = false;
  // Scale of the gate weights relative to Xavier; small keeps the initial
  // attention close to uniform.
  double phi_init_scale = 0.01;

  nlohmann::json to_json() const {
    return {{"basis", basis.to_json()},
            {"K", K},
            {"gate", to_string(gate)},
            {"shared_encoder", shared_encoder},
            {"phi_init_scale", phi_init_scale}};
  }

  static SocialConfig from_json(const nlohmann::json& j) {
    SocialConfig c;
    if (j.contains("basis")) c.basis = BasisConfig::from_json(j.at("basis"));
    c.K = j.value("K", c.K);
    c.gate = parse_gate_mode(j.value("gate", to_string(c.gate)));
    c.shared_encoder = j.value("shared_encoder", c.shared_encoder);
    c.phi_init_scale = j.value("phi_init_scale", c.phi_init_scale);
    c.validate();
    return c;
  }

  void validate() const {
    basis.validate();
    if (K < 1) throw UsageError("social config: K must be >= 1");
  }
};

/// Attention weights from gate logits. Softmax mode normalizes; sigmoid mode
/// returns the independent sigmoids.
template <typename Real>
std::vector<Real> attention_from_logits(std::span<const Real> z, GateMode mode) {
  if (mode == GateMode::softmax) return softmax<Real>(z);
  std::vector<Real> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = sigmoid<Real>(z[k]);
  return out;
}

/// Per-token mixture Σ_k π_k p_k. In sigmoid mode each row is renormalized.
template <typename Real>
Mat<Real> mix_rows(std::span<const Real> pi, const std::vector<Mat<Real>>& expert_rows, GateMode mode) {
  if (pi.size() != expert_rows.size() || expert_rows.empty()) throw UsageError("mix_rows: K mismatch");
  Mat<Real> out(expert_rows[0].rows, expert_rows[0].cols);
  for (std::size_t k = 0; k < pi.size(); ++k) {
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += pi[k] * expert_rows[k].data[i];
  }
  if (mode == GateMode::sigmoid) {
    for (std::size_t i = 0; i < out.rows; ++i) {
      auto r = out.row(i);
      Real s = 0;
      for (Real x : r) s += x;
      for (auto& x : r) x /= s;
    }
  }
  return out;
}

struct SocialDropout {
  std::vector<Rng>* encoder = nullptr;
  std::vector<Rng>* head = nullptr;
};

/// K basis taggers mixed by author-conditional attention computed from
/// frozen node embeddings. Authors outside the network share the trainable
/// fallback vector.
template <typename Real>
class SocialAttentionModel {
 public:
  SocialAttentionModel(FeatureSpace space, SocialConfig cfg, std::shared_ptr<const NodeEmbedding> emb)
      : space_(std::move(space)), cfg_(cfg), emb_(std::move(emb)) {
    cfg_.validate();
    if (!emb_ || emb_->dim == 0) throw UsageError("social model: node embedding is empty");
    embedding_hash_ = embedding_hash(*emb_);
    const std::size_t K = static_cast<std::size_t>(cfg_.K);
    const std::size_t n_enc = cfg_.shared_encoder ? 1 : K;
    for (std::size_t e = 0; e < n_enc; ++e) {
      encoders_.push_back(add_encoder(store_, "basis" + std::to_string(e) + ".", space_, cfg_.basis));
    }
    for (std::size_t k = 0; k < K; ++k) {
      heads_.push_back(add_head(store_, "basis" + std::to_string(k) + ".", space_, cfg_.basis));
    }
    phi_ = store_.add("gate.phi", K, emb_->dim);
    bias_ = store_.add("gate.b", 1, K);
    fallback_ = store_.add("gate.fallback", 1, emb_->dim);
  }

  void init(const Rng& rng) {
    for (std::size_t e = 0; e < encoders_.size(); ++e) init_encoder(store_, encoders_[e], rng.child("encoder", e));
    for (std::size_t k = 0; k < heads_.size(); ++k) init_head(store_, heads_[k], rng.child("head", k));
    Rng g = rng.child("gate");
    xavier_fill(store_[phi_], g, cfg_.phi_init_scale);
    xavier_fill(store_[fallback_], g);
  }

  int K() const noexcept { return cfg_.K; }
  GateMode gate_mode() const noexcept { return cfg_.gate; }
  const SocialConfig& config() const noexcept { return cfg_; }
  const FeatureSpace& space() const noexcept { return space_; }
  const Tagset& tagset() const noexcept { return space_.tagset; }
  const NodeEmbedding& node_embedding() const noexcept { return *emb_; }
  const std::string& node_embedding_hash() const noexcept { return embedding_hash_; }
  ParamStore<Real>& params() noexcept { return store_; }
  const ParamStore<Real>& params() const noexcept { return store_; }
  ParamId phi_id() const noexcept { return phi_; }
  ParamId bias_id() const noexcept { return bias_; }
  ParamId fallback_id() const noexcept { return fallback_; }

  bool embedded(const std::string& author) const { return emb_->contains(author); }

  /// v_a: the author's node embedding, or the fallback vector.
  std::vector<Real> author_vector(const std::string& author) const {
    if (const auto* v = emb_->find(author)) return std::vector<Real>(v->begin(), v->end());
    return store_[fallback_].value;
  }

  std::vector<Real> gate_logits(const std::string& author) const {
    const auto v = author_vector(author);
    std::vector<Real> z = store_[bias_].value;
    matvec_add<Real>(store_[phi_].value, z.size(), v.size(), v, z);
    return z;
  }

  std::vector<Real> attention(const std::string& author) const {
    const auto z = gate_logits(author);
    return attention_from_logits<Real>(z, cfg_.gate);
  }

  /// Per-expert p_k(y_i | x) rows.
  std::vector<Mat<Real>> expert_probs(const EncodedTweet& tw) const {
    std::vector<Mat<Real>> out;
    std::vector<Mat<Real>> hs;
    for (const auto& e : encoders_) {
      hs.push_back(encoder_forward(store_, e, space_, cfg_.basis, tw, tw.words, false, nullptr,
                                   nullptr));
    }
    for (std::size_t k = 0; k < heads_.size(); ++k) {
      const auto& h = hs[cfg_.shared_encoder ? 0 : k];
      out.push_back(head_forward(store_, heads_[k], cfg_.basis, h, tw.surface, false, nullptr,
                                 nullptr)
                        .probs);
    }
    return out;
  }

  Mat<Real> predict_encoded(const EncodedTweet& tw, const std::string& author) const {
    if (tw.size() == 0) return Mat<Real>(0, space_.tagset.size());
    const auto pi = attention(author);
    return mix_rows<Real>(pi, expert_probs(tw), cfg_.gate);
  }

  std::vector<int> tag_encoded(const EncodedTweet& tw) const {
    return BasisTagger<Real>::argmax_rows(predict_encoded(tw, tw.author_id));
  }
  std::vector<int> tag(const Tweet& tweet) const { return tag_encoded(space_.encode(tweet)); }

  /// Mixture token NLL -Σ_i log Σ_k π_k p_k(y_i). With accumulate=true the
  /// gradient w.r.t. every expert, φ, b and (for unembedded authors) the
  /// fallback vector is added to the store.
  double loss(const EncodedTweet& tw, std::span<const int> words, bool accumulate, bool training = false,
              SocialDropout dropout = {}) {
    const std::size_t T = tw.size();
    if (T == 0) return 0.0;
    const std::size_t K = heads_.size();
    const std::size_t n_enc = encoders_.size();

    std::vector<EncoderCache<Real>> ec(n_enc);
    std::vector<Mat<Real>> hs(n_enc);
    std::vector<HeadCache<Real>> hc(K);
    std::vector<HeadOutput<Real>> outs(K);
    for (std::size_t e = 0; e < n_enc; ++e) {
      hs[e] = encoder_forward(store_, encoders_[e], space_, cfg_.basis, tw, words, training,
                              dropout.encoder ? &(*dropout.encoder)[e] : nullptr, &ec[e]);
    }
    for (std::size_t k = 0; k < K; ++k) {
      outs[k] = head_forward(store_, heads_[k], cfg_.basis, hs[cfg_.shared_encoder ? 0 : k], tw.surface, training,
                             dropout.head ? &(*dropout.head)[k] : nullptr, &hc[k]);
    }

    const auto v = author_vector(tw.author_id);
    const auto z = gate_logits(tw.author_id);
    std::vector<Real> log_pi(K), pi(K);
    Real pi_sum = 0;
    if (cfg_.gate == GateMode::softmax) {
      const Real lse = log_sum_exp<Real>(z);
      for (std::size_t k = 0; k < K; ++k) {
        log_pi[k] = z[k] - lse;
        pi[k] = std::exp(log_pi[k]);
      }
      pi_sum = 1;
    } else {
      for (std::size_t k = 0; k < K; ++k) {
        pi[k] = sigmoid<Real>(z[k]);
        pi_sum += pi[k];
      }
      const Real log_sum = std::log(pi_sum);
      for (std::size_t k = 0; k < K; ++k) log_pi[k] = std::log(pi[k]) - log_sum;
    }

    double nll = 0.0;
    Mat<Real> gamma(T, K);
    std::vector<Real> lp(K);
    for (std::size_t i = 0; i < T; ++i) {
      const auto y = static_cast<std::size_t>(tw.gold[i]);
      for (std::size_t k = 0; k < K; ++k) lp[k] = log_pi[k] + outs[k].log_probs(i, y);
      const Real log_p = log_sum_exp<Real>(lp);
      nll -= static_cast<double>(log_p);
      for (std::size_t k = 0; k < K; ++k) gamma(i, k) = std::exp(lp[k] - log_p);
    }
    if (!accumulate) return nll;

    // Experts: d/dlogits_k = γ_ik (p_k - onehot).
    std::vector<Mat<Real>> dh(n_enc);
    for (std::size_t k = 0; k < K; ++k) {
      Mat<Real> dl = outs[k].probs;
      for (std::size_t i = 0; i < T; ++i) {
        const Real g = gamma(i, k);
        auto r = dl.row(i);
        r[static_cast<std::size_t>(tw.gold[i])] -= Real(1);
        for (auto& x : r) x *= g;
      }
      const std::size_t e = cfg_.shared_encoder ? 0 : k;
      auto d = head_backward(store_, heads_[k], cfg_.basis, hc[k], hs[e], tw.surface, dl);
      if (dh[e].data.empty()) {
        dh[e] = std::move(d);
      } else {
        for (std::size_t j = 0; j < d.data.size(); ++j) dh[e].data[j] += d.data[j];
      }
    }
    for (std::size_t e = 0; e < n_enc; ++e) encoder_backward(store_, encoders_[e], space_, cfg_.basis, ec[e], dh[e]);

    // Gate.
    std::vector<Real> dz(K, Real(0));
    if (cfg_.gate == GateMode::softmax) {
      for (std::size_t k = 0; k < K; ++k) {
        Real s = 0;
        for (std::size_t i = 0; i < T; ++i) s += pi[k] - gamma(i, k);
        dz[k] = s;
      }
    } else {
      for (std::size_t k = 0; k < K; ++k) {
        Real s = 0;
        for (std::size_t i = 0; i < T; ++i) s += -gamma(i, k) / pi[k] + Real(1) / pi_sum;
        dz[k] = s * pi[k] * (Real(1) - pi[k]);
      }
    }
    auto& phi = store_[phi_];
    auto& b = store_[bias_];
    outer_add<Real>(dz, v, v.size(), phi.grad);
    for (std::size_t k = 0; k < K; ++k) b.grad[k] += dz[k];
    if (!embedded(tw.author_id)) {
      matvec_t_add<Real>(phi.value, K, v.size(), dz, store_[fallback_].grad);
    }
    return nll;
  }

  double loss(const EncodedTweet& tw, bool accumulate) { return loss(tw, tw.words, accumulate); }

  nlohmann::json to_json() const {
    return {{"config", cfg_.to_json()},
            {"space", space_.to_json()},
            {"K", cfg_.K},
            {"gate_mode", to_string(cfg_.gate)},
            {"embedding_hash", embedding_hash_},
            {"arrays", arrays_to_json(store_)}};
  }

  static SocialAttentionModel from_json(const nlohmann::json& j, std::shared_ptr<const LexicalResources> res,
                                        std::shared_ptr<const NodeEmbedding> emb) {
    auto cfg = SocialConfig::from_json(j.at("config"));
    if (j.at("K").get<int>() != cfg.K) throw DataError("social checkpoint: K does not match config");
    if (parse_gate_mode(j.at("gate_mode").get<std::string>()) != cfg.gate) {
      throw DataError("social checkpoint: gate_mode does not match config");
    }
    SocialAttentionModel m(FeatureSpace::from_json(j.at("space"), std::move(res)), cfg, std::move(emb));
    if (j.at("embedding_hash").get<std::string>() != m.embedding_hash_) {
      throw DataError("social checkpoint: node embedding hash mismatch (model trained on a different embedding)");
    }
    arrays_from_json(m.store_, j.at("arrays"));
    return m;
  }

 private:
  FeatureSpace space_;
  SocialConfig cfg_;
  std::shared_ptr<const NodeEmbedding> emb_;
  std::string embedding_hash_;
  ParamStore<Real> store_;
  std::vector<EncoderParams> encoders_;
  std::vector<HeadParams> heads_;
  ParamId phi_ = 0, bias_ = 0, fallback_ = 0;
};

template <typename Real>
std::vector<double> attention_weights(const SocialAttentionModel<Real>& model, const std::string& author_id) {
  const auto pi = model.attention(author_id);
  return {pi.begin(), pi.end()};
}

template <typename Real>
Mat<Real> mixture_predict(const SocialAttentionModel<Real>& model, const Tweet& tweet, const std::string& author_id) {
  return model.predict_encoded(model.space().encode(tweet), author_id);
}

struct ExpertUtilization {
  std::vector<double> mean_weight;    // mean π_k over authors
  std::vector<double> argmax_share;   // fraction of authors whose largest weight is expert k
};

template <typename Real>
ExpertUtilization expert_utilization(const SocialAttentionModel<Real>& model, const std::vector<std::string>& authors) {
  const auto K = static_cast<std::size_t>(model.K());
  ExpertUtilization u{std::vector<double>(K, 0.0), std::vector<double>(K, 0.0)};
  if (authors.empty()) return u;
  for (const auto& a : authors) {
    const auto pi = attention_weights(model, a);
    std::size_t best = 0;
    for (std::size_t k = 0; k < K; ++k) {
      u.mean_weight[k] += pi[k];
      if (pi[k] > pi[best]) best = k;
    }
    u.argmax_share[best] += 1.0;
  }
  const double n = static_cast<double>(authors.size());
  for (std::size_t k = 0; k < K; ++k) {
    u.mean_weight[k] /= n;
    u.argmax_share[k] /= n;
  }
  return u;
}

/// Joint Adam training of all experts and the gate on the L2-regularized
/// mixture NLL, with node embeddings frozen. Uses the same random streams
/// and schedule as train_basis, so K = 1 reproduces it exactly.
template <typename Real>
SocialAttentionModel<Real> train_social(const Corpus& train, const Corpus& valid,
                                        std::shared_ptr<const NodeEmbedding> emb,
                                        std::shared_ptr<const LexicalResources> res, const SocialConfig& cfg,
                                        const Rng& rng, TrainLog* log_out = nullptr) {
  if (train.empty()) throw UsageError("train_social: empty training corpus");
  if (!train.labeled() || !valid.labeled()) throw UsageError("train_social: corpora must be labeled");
  const auto& bc = cfg.basis;

  SocialAttentionModel<Real> model(FeatureSpace::build(train, std::move(res), bc), cfg, std::move(emb));
  model.init(rng.child("init"));
  const auto data = model.space().encode(train);
  const auto vdata = model.space().encode(valid);
  const auto authors = train.authors();

  Rng order_rng = rng.child("order");
  Rng unk_rng = rng.child("unk");
  std::vector<Rng> enc_drop, head_drop;
  const std::size_t n_enc = cfg.shared_encoder ? 1 : static_cast<std::size_t>(cfg.K);
  for (std::size_t e = 0; e < n_enc; ++e) enc_drop.push_back(rng.child("dropout", e));
  for (std::size_t k = 0; k < static_cast<std::size_t>(cfg.K); ++k) head_drop.push_back(rng.child("head-dropout", k));
  const AdamConfig adam{bc.lr};

  TrainLog log;
  double best_acc = vdata.empty() ? 0.0 : detail::accuracy_encoded(model, vdata);
  log.valid_accuracy.push_back(best_acc);
  ParamStore<Real> best = model.params();
  int since_best = 0;

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto& store = model.params();
  for (int epoch = 1; epoch <= bc.epochs; ++epoch) {
    order_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(bc.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(bc.batch_size));
      store.zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        const auto& tw = data[order[b]];
        const auto words = replace_hapax(model.space(), tw.words, bc.unk_replace, unk_rng);
        total += model.loss(tw, words, true, true, {&enc_drop, &head_drop});
      }
      total += l2_penalty(store, bc.l2);
      add_l2_grad(store, bc.l2);
      adam_step(store, adam);
    }
    log.epoch_loss.push_back(total);
    const double acc = vdata.empty() ? 0.0 : detail::accuracy_encoded(model, vdata);
    log.valid_accuracy.push_back(acc);

    const auto util = expert_utilization(model, authors);
    log::info("social epoch ", epoch, " loss ", total, " valid acc ", acc);
    for (std::size_t k = 0; k < util.mean_weight.size(); ++k) {
      log::debug("  expert ", k, " mean weight ", util.mean_weight[k], " argmax share ", util.argmax_share[k]);
      if (cfg.K > 1 && util.mean_weight[k] < 1.0 / (10.0 * cfg.K)) {
        log::warn("expert ", k, " mean attention ", util.mean_weight[k], " below 1/(10K) at epoch ", epoch);
      }
    }

    if (acc > best_acc) {
      best_acc = acc;
      best = store;
      log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= bc.patience) {
      break;
    }
  }
  store.copy_values_from(best);
  if (log_out) *log_out = std::move(log);
  return model;
}

}  // namespace sociotag
