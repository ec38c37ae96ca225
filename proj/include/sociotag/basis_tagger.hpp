#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "sociotag/corpus.hpp"
#include "sociotag/error.hpp"
#include "sociotag/evaluate.hpp"
#include "sociotag/features.hpp"
#include "sociotag/log.hpp"
#include "sociotag/lstm.hpp"
#include "sociotag/numerics.hpp"
#include "sociotag/rng.hpp"

namespace sociotag {

struct BasisConfig {
  std::size_t char_dim = 30;
  std::size_t char_hidden = 50;   // per direction
  std::size_t word_dim = 50;
  std::size_t word_hidden = 150;  // per direction
  std::size_t fc_dim = 100;
  double dropout = 0.35;
  double l2 = 0.01;
  double lr = 1e-3;
  // Probability of replacing a training hapax word by <UNK>.
  double unk_replace = 0.5;
  int epochs = 30;
  int patience = 5;
  int batch_size = 1;
  bool surface_features = true;
  bool pretrained = true;

  nlohmann::json to_json() const {
    return {{"char_dim", char_dim},       {"char_hidden", char_hidden}, {"word_dim", word_dim},
            {"word_hidden", word_hidden}, {"fc_dim", fc_dim},           {"dropout", dropout},
            {"l2", l2},                   {"lr", lr},                   {"unk_replace", unk_replace},
            {"epochs", epochs},           {"patience", patience},       {"batch_size", batch_size},
            {"surface_features", surface_features}, {"pretrained", pretrained}};
  }

  static BasisConfig from_json(const nlohmann::json& j) {
    BasisConfig c;
    c.char_dim = j.value("char_dim", c.char_dim);
    c.char_hidden = j.value("char_hidden", c.char_hidden);
    c.word_dim = j.value("word_dim", c.word_dim);
    c.word_hidden = j.value("word_hidden", c.word_hidden);
    c.fc_dim = j.value("fc_dim", c.fc_dim);
    c.dropout = j.value("dropout", c.dropout);
    c.l2 = j.value("l2", c.l2);
    c.lr = j.value("lr", c.lr);
    c.unk_replace = j.value("unk_replace", c.unk_replace);
    c.epochs = j.value("epochs", c.epochs);
    c.patience = j.value("patience", c.patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.surface_features = j.value("surface_features", c.surface_features);
    c.pretrained = j.value("pretrained", c.pretrained);
    c.validate();
    return c;
  }

  void validate() const {
    if (char_dim == 0 || char_hidden == 0 || word_dim == 0 || word_hidden == 0 || fc_dim == 0) {
      throw UsageError("basis config: all dimensions must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("basis config: dropout must be in [0, 1)");
    if (epochs < 0 || patience < 1 || batch_size < 1) throw UsageError("basis config: bad schedule");
  }
};

/// A tweet converted to model ids.
struct EncodedTweet {
  std::vector<std::vector<int>> chars;
  std::vector<int> words;
  std::vector<const std::vector<double>*> pretrained;
  std::vector<std::vector<int>> surface;
  std::vector<int> gold;
  std::string author_id;

  std::size_t size() const noexcept { return words.size(); }
};

/// Vocabularies and feature indexes fixed at training time; shared by all
/// experts of a mixture.
struct FeatureSpace {
  Tagset tagset;
  Vocab chars;
  Vocab words;
  std::vector<char> hapax;  // by word id
  SurfaceFeatureIndex surface;
  std::shared_ptr<const LexicalResources> resources;
  std::size_t pretrained_dim = 0;

  static FeatureSpace build(const Corpus& train, std::shared_ptr<const LexicalResources> res,
                            const BasisConfig& cfg) {
    FeatureSpace fs;
    fs.tagset = train.tagset;
    fs.resources = res ? std::move(res) : std::make_shared<LexicalResources>();
    std::unordered_map<std::string, int> freq;
    for (const auto& t : train.tweets) {
      for (const auto& tok : t.tokens) {
        ++freq[tok.normalized];
        fs.words.add(tok.normalized);
        for (const auto& c : text::utf8_chars(tok.normalized)) fs.chars.add(c);
      }
    }
    fs.hapax.assign(fs.words.size(), 0);
    for (std::size_t i = 1; i < fs.words.size(); ++i) fs.hapax[i] = freq[fs.words.items()[i]] == 1 ? 1 : 0;
    if (cfg.surface_features) fs.surface = SurfaceFeatureIndex::build(train, *fs.resources);
    fs.pretrained_dim = cfg.pretrained ? fs.resources->word_vectors.dim : 0;
    return fs;
  }

  EncodedTweet encode(const Tweet& tweet) const {
    EncodedTweet e;
    e.author_id = tweet.author_id;
    const std::size_t T = tweet.size();
    e.chars.resize(T);
    e.words.resize(T);
    e.pretrained.assign(T, nullptr);
    e.surface.resize(T);
    for (std::size_t i = 0; i < T; ++i) {
      const auto& w = tweet.tokens[i].normalized;
      for (const auto& c : text::utf8_chars(w)) e.chars[i].push_back(chars.get(c));
      e.words[i] = words.get(w);
      if (pretrained_dim > 0) e.pretrained[i] = resources->word_vectors.find(w);
      if (surface.size() > 0) e.surface[i] = surface.encode(tweet, i, *resources);
    }
    if (tweet.tags) e.gold = *tweet.tags;
    return e;
  }

  std::vector<EncodedTweet> encode(const Corpus& corpus) const {
    std::vector<EncodedTweet> out;
    out.reserve(corpus.size());
    for (const auto& t : corpus.tweets) out.push_back(encode(t));
    return out;
  }

  std::size_t word_input_dim(const BasisConfig& cfg) const {
    return 2 * cfg.char_hidden + cfg.word_dim + pretrained_dim;
  }

  nlohmann::json to_json() const {
    std::vector<int> hapax_ids;
    for (std::size_t i = 0; i < hapax.size(); ++i) {
      if (hapax[i]) hapax_ids.push_back(static_cast<int>(i));
    }
    return {{"tagset", tagset.symbols()},   {"chars", chars.items()},         {"words", words.items()},
            {"hapax", hapax_ids},          {"surface", surface.names()},     {"pretrained_dim", pretrained_dim}};
  }

  static FeatureSpace from_json(const nlohmann::json& j, std::shared_ptr<const LexicalResources> res) {
    FeatureSpace fs;
    fs.tagset = Tagset(j.at("tagset").get<std::vector<std::string>>());
    fs.chars = Vocab::from_items(j.at("chars").get<std::vector<std::string>>());
    fs.words = Vocab::from_items(j.at("words").get<std::vector<std::string>>());
    fs.hapax.assign(fs.words.size(), 0);
    for (int id : j.at("hapax").get<std::vector<int>>()) fs.hapax.at(static_cast<std::size_t>(id)) = 1;
    fs.surface = SurfaceFeatureIndex::from_names(j.at("surface").get<std::vector<std::string>>());
    fs.resources = res ? std::move(res) : std::make_shared<LexicalResources>();
    fs.pretrained_dim = j.at("pretrained_dim").get<std::size_t>();
    if (fs.pretrained_dim > 0 && fs.resources->word_vectors.dim != fs.pretrained_dim) {
      throw DataError("pretrained vectors have dim " + std::to_string(fs.resources->word_vectors.dim) +
                      ", model expects " + std::to_string(fs.pretrained_dim));
    }
    return fs;
  }
};

// ---------------------------------------------------------------------------
// Encoder: char biLSTM + embeddings -> word biLSTM.

struct EncoderParams {
  ParamId char_emb = 0;
  ParamId word_emb = 0;
  LstmLayer char_fwd, char_bwd, word_fwd, word_bwd;
};

template <typename Real>
EncoderParams add_encoder(ParamStore<Real>& store, const std::string& prefix, const FeatureSpace& fs,
                          const BasisConfig& cfg) {
  EncoderParams e;
  e.char_emb = store.add(prefix + "char_emb", fs.chars.size(), cfg.char_dim);
  e.char_fwd = add_lstm(store, prefix + "char_fwd", cfg.char_dim, cfg.char_hidden);
  e.char_bwd = add_lstm(store, prefix + "char_bwd", cfg.char_dim, cfg.char_hidden);
  e.word_emb = store.add(prefix + "word_emb", fs.words.size(), cfg.word_dim);
  const std::size_t din = fs.word_input_dim(cfg);
  e.word_fwd = add_lstm(store, prefix + "word_fwd", din, cfg.word_hidden);
  e.word_bwd = add_lstm(store, prefix + "word_bwd", din, cfg.word_hidden);
  return e;
}

template <typename Real>
void init_encoder(ParamStore<Real>& store, const EncoderParams& e, Rng rng) {
  xavier_fill(store[e.char_emb], rng);
  init_lstm(store, e.char_fwd, rng);
  init_lstm(store, e.char_bwd, rng);
  xavier_fill(store[e.word_emb], rng);
  init_lstm(store, e.word_fwd, rng);
  init_lstm(store, e.word_bwd, rng);
}

template <typename Real>
struct EncoderCache {
  std::vector<int> words;
  std::vector<std::vector<int>> chars;
  std::vector<LstmCache<Real>> char_f, char_b;
  std::vector<Real> x_mask;
  LstmCache<Real> word_f, word_b;
};

/// Returns h (T x 2*word_hidden). In training mode the word-LSTM input is
/// passed through inverted dropout drawn from `dropout_rng`.
template <typename Real>
Mat<Real> encoder_forward(const ParamStore<Real>& store, const EncoderParams& e, const FeatureSpace& fs,
                          const BasisConfig& cfg, const EncodedTweet& tw, std::span<const int> word_ids,
                          bool training, Rng* dropout_rng, std::type_identity_t<EncoderCache<Real>>* cache) {
  const std::size_t T = tw.size();
  const std::size_t Hc = cfg.char_hidden, Dw = cfg.word_dim, Dp = fs.pretrained_dim;
  const std::size_t din = fs.word_input_dim(cfg);
  const auto& cemb = store[e.char_emb];
  const auto& wemb = store[e.word_emb];

  Mat<Real> x(T, din);
  if (cache) {
    cache->words.assign(word_ids.begin(), word_ids.end());
    cache->chars = tw.chars;
    cache->char_f.assign(T, {});
    cache->char_b.assign(T, {});
  }
  for (std::size_t i = 0; i < T; ++i) {
    auto xi = x.row(i);
    const auto& cs = tw.chars[i];
    if (!cs.empty()) {
      Mat<Real> in(cs.size(), cfg.char_dim);
      for (std::size_t j = 0; j < cs.size(); ++j) {
        const auto r = cemb.row(static_cast<std::size_t>(cs[j]));
        std::copy(r.begin(), r.end(), in.row(j).begin());
      }
      const auto f = lstm_sequence_forward(store, e.char_fwd, in, Direction::forward, cache ? &cache->char_f[i] : nullptr);
      const auto b = lstm_sequence_forward(store, e.char_bwd, in, Direction::backward, cache ? &cache->char_b[i] : nullptr);
      std::copy(f.row(cs.size() - 1).begin(), f.row(cs.size() - 1).end(), xi.begin());
      std::copy(b.row(0).begin(), b.row(0).end(), xi.begin() + static_cast<std::ptrdiff_t>(Hc));
    }
    const auto w = wemb.row(static_cast<std::size_t>(word_ids[i]));
    std::copy(w.begin(), w.end(), xi.begin() + static_cast<std::ptrdiff_t>(2 * Hc));
    if (Dp > 0 && tw.pretrained[i]) {
      const auto& p = *tw.pretrained[i];
      for (std::size_t k = 0; k < Dp; ++k) xi[2 * Hc + Dw + k] = static_cast<Real>(p[k]);
    }
  }
  if (training && cfg.dropout > 0.0) {
    auto mask = dropout_mask<Real>(T * din, cfg.dropout, *dropout_rng, true);
    for (std::size_t k = 0; k < x.data.size(); ++k) x.data[k] *= mask[k];
    if (cache) cache->x_mask = std::move(mask);
  } else if (cache) {
    cache->x_mask.clear();
  }

  const auto hf = lstm_sequence_forward(store, e.word_fwd, x, Direction::forward, cache ? &cache->word_f : nullptr);
  const auto hb = lstm_sequence_forward(store, e.word_bwd, x, Direction::backward, cache ? &cache->word_b : nullptr);
  const std::size_t Hw = cfg.word_hidden;
  Mat<Real> h(T, 2 * Hw);
  for (std::size_t i = 0; i < T; ++i) {
    std::copy(hf.row(i).begin(), hf.row(i).end(), h.row(i).begin());
    std::copy(hb.row(i).begin(), hb.row(i).end(), h.row(i).begin() + static_cast<std::ptrdiff_t>(Hw));
  }
  return h;
}

template <typename Real>
void encoder_backward(ParamStore<Real>& store, const EncoderParams& e, const FeatureSpace& fs,
                      const BasisConfig& cfg, const EncoderCache<Real>& cache, const Mat<Real>& dh) {
  const std::size_t T = dh.rows;
  const std::size_t Hw = cfg.word_hidden, Hc = cfg.char_hidden, Dw = cfg.word_dim;
  Mat<Real> dhf(T, Hw), dhb(T, Hw);
  for (std::size_t i = 0; i < T; ++i) {
    const auto r = dh.row(i);
    std::copy(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(Hw), dhf.row(i).begin());
    std::copy(r.begin() + static_cast<std::ptrdiff_t>(Hw), r.end(), dhb.row(i).begin());
  }
  auto dx = lstm_sequence_backward(store, e.word_fwd, cache.word_f, dhf);
  const auto dxb = lstm_sequence_backward(store, e.word_bwd, cache.word_b, dhb);
  for (std::size_t k = 0; k < dx.data.size(); ++k) dx.data[k] += dxb.data[k];
  if (!cache.x_mask.empty()) {
    for (std::size_t k = 0; k < dx.data.size(); ++k) dx.data[k] *= cache.x_mask[k];
  }
  (void)fs;

  auto& wemb = store[e.word_emb];
  auto& cemb = store[e.char_emb];
  for (std::size_t i = 0; i < T; ++i) {
    const auto dxi = dx.row(i);
    auto gw = wemb.grad_row(static_cast<std::size_t>(cache.words[i]));
    for (std::size_t k = 0; k < Dw; ++k) gw[k] += dxi[2 * Hc + k];

    const auto& cs = cache.chars[i];
    if (cs.empty()) continue;
    const std::size_t m = cs.size();
    Mat<Real> dof(m, Hc), dob(m, Hc);
    std::copy(dxi.begin(), dxi.begin() + static_cast<std::ptrdiff_t>(Hc), dof.row(m - 1).begin());
    std::copy(dxi.begin() + static_cast<std::ptrdiff_t>(Hc), dxi.begin() + static_cast<std::ptrdiff_t>(2 * Hc),
              dob.row(0).begin());
    const auto dinf = lstm_sequence_backward(store, e.char_fwd, cache.char_f[i], dof);
    const auto dinb = lstm_sequence_backward(store, e.char_bwd, cache.char_b[i], dob);
    for (std::size_t j = 0; j < m; ++j) {
      auto gc = cemb.grad_row(static_cast<std::size_t>(cs[j]));
      for (std::size_t k = 0; k < cfg.char_dim; ++k) gc[k] += dinf(j, k) + dinb(j, k);
    }
  }
}

// ---------------------------------------------------------------------------
// Head: [h_i ; s_i] -> tanh FC -> r_i -> softmax over tags.

struct HeadParams {
  ParamId fc_w = 0;
  ParamId fc_b = 0;
  ParamId out_w = 0;
  ParamId out_b = 0;
};

template <typename Real>
HeadParams add_head(ParamStore<Real>& store, const std::string& prefix, const FeatureSpace& fs,
                    const BasisConfig& cfg) {
  HeadParams h;
  h.fc_w = store.add(prefix + "fc.W", cfg.fc_dim, 2 * cfg.word_hidden + fs.surface.size());
  h.fc_b = store.add(prefix + "fc.b", 1, cfg.fc_dim);
  h.out_w = store.add(prefix + "out.W", fs.tagset.size(), cfg.fc_dim);
  h.out_b = store.add(prefix + "out.b", 1, fs.tagset.size());
  return h;
}

template <typename Real>
void init_head(ParamStore<Real>& store, const HeadParams& h, Rng rng) {
  xavier_fill(store[h.fc_w], rng);
  xavier_fill(store[h.out_w], rng);
}

template <typename Real>
struct HeadOutput {
  Mat<Real> probs;
  Mat<Real> log_probs;
};

template <typename Real>
struct HeadCache {
  Mat<Real> r;  // tanh activations
  std::vector<Real> mask;
  Mat<Real> r_drop;
};

template <typename Real>
HeadOutput<Real> head_forward(const ParamStore<Real>& store, const HeadParams& hp, const BasisConfig& cfg,
                              const Mat<Real>& h, const std::vector<std::vector<int>>& surface, bool training,
                              Rng* dropout_rng, std::type_identity_t<HeadCache<Real>>* cache) {
  const std::size_t T = h.rows, R = cfg.fc_dim, Hin = h.cols;
  const auto& W = store[hp.fc_w];
  const auto& b = store[hp.fc_b].value;
  const auto& Wo = store[hp.out_w];
  const auto& bo = store[hp.out_b].value;
  const std::size_t L = Wo.rows;
  const std::size_t cols = W.cols;

  Mat<Real> r(T, R);
  for (std::size_t i = 0; i < T; ++i) {
    const auto hi = h.row(i);
    const auto& si = surface.empty() ? std::vector<int>{} : surface[i];
    for (std::size_t o = 0; o < R; ++o) {
      const Real* wr = W.value.data() + o * cols;
      Real a = b[o];
      for (std::size_t c = 0; c < Hin; ++c) a += wr[c] * hi[c];
      for (int j : si) a += wr[Hin + static_cast<std::size_t>(j)];
      r(i, o) = std::tanh(a);
    }
  }
  Mat<Real> rd = r;
  std::vector<Real> mask;
  if (training && cfg.dropout > 0.0) {
    mask = dropout_mask<Real>(T * R, cfg.dropout, *dropout_rng, true);
    for (std::size_t k = 0; k < rd.data.size(); ++k) rd.data[k] *= mask[k];
  }

  HeadOutput<Real> out{Mat<Real>(T, L), Mat<Real>(T, L)};
  std::vector<Real> logits(L);
  for (std::size_t i = 0; i < T; ++i) {
    std::copy(bo.begin(), bo.end(), logits.begin());
    matvec_add<Real>(Wo.value, L, R, rd.row(i), logits);
    const Real lse = log_sum_exp<Real>(logits);
    for (std::size_t t = 0; t < L; ++t) {
      out.log_probs(i, t) = logits[t] - lse;
      out.probs(i, t) = std::exp(logits[t] - lse);
    }
  }
  if (cache) {
    cache->r = std::move(r);
    cache->mask = std::move(mask);
    cache->r_drop = std::move(rd);
  }
  return out;
}

/// Backward from d(loss)/d(logits); accumulates head gradients and returns dh.
template <typename Real>
Mat<Real> head_backward(ParamStore<Real>& store, const HeadParams& hp, const BasisConfig& cfg,
                        const HeadCache<Real>& cache, const Mat<Real>& h,
                        const std::vector<std::vector<int>>& surface, const Mat<Real>& dlogits) {
  const std::size_t T = h.rows, R = cfg.fc_dim, Hin = h.cols;
  auto& W = store[hp.fc_w];
  auto& b = store[hp.fc_b];
  auto& Wo = store[hp.out_w];
  auto& bo = store[hp.out_b];
  const std::size_t L = Wo.rows;
  const std::size_t cols = W.cols;

  Mat<Real> dh(T, Hin);
  std::vector<Real> dr(R), da(R);
  for (std::size_t i = 0; i < T; ++i) {
    const auto dl = dlogits.row(i);
    outer_add<Real>(dl, cache.r_drop.row(i), R, Wo.grad);
    for (std::size_t t = 0; t < L; ++t) bo.grad[t] += dl[t];
    std::fill(dr.begin(), dr.end(), Real(0));
    matvec_t_add<Real>(Wo.value, L, R, dl, dr);
    for (std::size_t o = 0; o < R; ++o) {
      Real g = dr[o];
      if (!cache.mask.empty()) g *= cache.mask[i * R + o];
      const Real ri = cache.r(i, o);
      da[o] = g * (Real(1) - ri * ri);
    }
    const auto hi = h.row(i);
    auto dhi = dh.row(i);
    const auto& si = surface.empty() ? std::vector<int>{} : surface[i];
    for (std::size_t o = 0; o < R; ++o) {
      const Real d = da[o];
      if (d == Real(0)) continue;
      b.grad[o] += d;
      Real* gr = W.grad.data() + o * cols;
      const Real* wr = W.value.data() + o * cols;
      for (std::size_t c = 0; c < Hin; ++c) {
        gr[c] += d * hi[c];
        dhi[c] += d * wr[c];
      }
      for (int j : si) gr[Hin + static_cast<std::size_t>(j)] += d;
    }
  }
  return dh;
}

// ---------------------------------------------------------------------------

/// Random-number streams consumed by one training step of one expert.
struct DropoutStreams {
  Rng* encoder = nullptr;
  Rng* head = nullptr;
};

/// Replaces training hapax words by <UNK> with probability `rate`.
inline std::vector<int> replace_hapax(const FeatureSpace& fs, const std::vector<int>& words, double rate, Rng& rng) {
  std::vector<int> out = words;
  if (rate <= 0.0) return out;
  for (auto& w : out) {
    if (w != Vocab::kUnk && fs.hapax[static_cast<std::size_t>(w)] && rng.bernoulli(rate)) w = Vocab::kUnk;
  }
  return out;
}

/// Hierarchical BiLSTM tagger producing p(y_i | x) per token.
template <typename Real>
class BasisTagger {
 public:
  BasisTagger(FeatureSpace space, BasisConfig cfg) : space_(std::move(space)), cfg_(cfg) {
    cfg_.validate();
    encoder_ = add_encoder(store_, "basis0.", space_, cfg_);
    head_ = add_head(store_, "basis0.", space_, cfg_);
  }

  void init(const Rng& rng) {
    init_encoder(store_, encoder_, rng.child("encoder", 0));
    init_head(store_, head_, rng.child("head", 0));
  }

  const FeatureSpace& space() const noexcept { return space_; }
  const BasisConfig& config() const noexcept { return cfg_; }
  const Tagset& tagset() const noexcept { return space_.tagset; }
  ParamStore<Real>& params() noexcept { return store_; }
  const ParamStore<Real>& params() const noexcept { return store_; }

  /// T x |tags| rows of p(y_i | x). Eval mode never touches `dropout`.
  Mat<Real> forward(const EncodedTweet& tw, bool training = false, DropoutStreams dropout = {}) const {
    if (tw.size() == 0) return Mat<Real>(0, space_.tagset.size());
    const auto h = encoder_forward(store_, encoder_, space_, cfg_, tw, tw.words, training, dropout.encoder, nullptr);
    return head_forward(store_, head_, cfg_, h, tw.surface, training, dropout.head, nullptr).probs;
  }

  Mat<Real> predict(const Tweet& tweet) const { return forward(space_.encode(tweet)); }

  std::vector<int> tag_encoded(const EncodedTweet& tw) const { return argmax_rows(forward(tw)); }
  std::vector<int> tag(const Tweet& tweet) const { return tag_encoded(space_.encode(tweet)); }

  /// Token NLL of the gold tags (no regularizer). With accumulate=true the
  /// gradient is added to the store.
  double loss(const EncodedTweet& tw, std::span<const int> words, bool accumulate, bool training = false,
              DropoutStreams dropout = {}) {
    if (tw.size() == 0) return 0.0;
    EncoderCache<Real> ec;
    HeadCache<Real> hc;
    const auto h = encoder_forward(store_, encoder_, space_, cfg_, tw, words, training, dropout.encoder, &ec);
    const auto out = head_forward(store_, head_, cfg_, h, tw.surface, training, dropout.head, &hc);
    double nll = 0.0;
    for (std::size_t i = 0; i < tw.size(); ++i) nll -= static_cast<double>(out.log_probs(i, static_cast<std::size_t>(tw.gold[i])));
    if (!accumulate) return nll;
    Mat<Real> dlogits = out.probs;
    for (std::size_t i = 0; i < tw.size(); ++i) dlogits(i, static_cast<std::size_t>(tw.gold[i])) -= Real(1);
    const auto dh = head_backward(store_, head_, cfg_, hc, h, tw.surface, dlogits);
    encoder_backward(store_, encoder_, space_, cfg_, ec, dh);
    return nll;
  }

  double loss(const EncodedTweet& tw, bool accumulate) { return loss(tw, tw.words, accumulate); }

  nlohmann::json to_json() const {
    return {{"config", cfg_.to_json()}, {"space", space_.to_json()}, {"arrays", arrays_to_json(store_)}};
  }

  static BasisTagger from_json(const nlohmann::json& j, std::shared_ptr<const LexicalResources> res) {
    BasisTagger m(FeatureSpace::from_json(j.at("space"), std::move(res)), BasisConfig::from_json(j.at("config")));
    arrays_from_json(m.store_, j.at("arrays"));
    return m;
  }

  static std::vector<int> argmax_rows(const Mat<Real>& p) {
    std::vector<int> out(p.rows);
    for (std::size_t i = 0; i < p.rows; ++i) {
      const auto r = p.row(i);
      out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
  }

 private:
  FeatureSpace space_;
  BasisConfig cfg_;
  ParamStore<Real> store_;
  EncoderParams encoder_;
  HeadParams head_;
};

template <typename Real>
Mat<Real> basis_forward(const BasisTagger<Real>& model, const EncodedTweet& tw, bool training, DropoutStreams dropout = {}) {
  return model.forward(tw, training, dropout);
}

struct TrainLog {
  std::vector<double> epoch_loss;      // training NLL + L2, summed over steps
  std::vector<double> valid_accuracy;  // index 0 = before training
  std::vector<double> train_accuracy;  // filled when requested
  int best_epoch = 0;
};

namespace detail {

template <typename Model>
double accuracy_encoded(const Model& m, const std::vector<EncodedTweet>& data) {
  std::size_t correct = 0, total = 0;
  for (const auto& tw : data) {
    const auto pred = m.tag_encoded(tw);
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == tw.gold[i] ? 1 : 0;
    total += pred.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace detail

/// Adam on L2-regularized token NLL with dropout and hapax-to-UNK
/// replacement. Validation accuracy is measured before training and after
/// every epoch; the best checkpoint is returned, and training stops after
/// `patience` epochs without improvement.
///
/// Random streams derived from `rng`: "init" (parameters), "order"
/// (shuffling), "unk" (hapax replacement), "dropout"/0 and
/// "head-dropout"/0 (dropout masks).
template <typename Real>
BasisTagger<Real> train_basis(const Corpus& train, const Corpus& valid, std::shared_ptr<const LexicalResources> res,
                              const BasisConfig& cfg, const Rng& rng, TrainLog* log_out = nullptr,
                              bool track_train_accuracy = false) {
  if (train.empty()) throw UsageError("train_basis: empty training corpus");
  if (!train.labeled() || !valid.labeled()) throw UsageError("train_basis: corpora must be labeled");

  BasisTagger<Real> model(FeatureSpace::build(train, std::move(res), cfg), cfg);
  model.init(rng.child("init"));
  const auto data = model.space().encode(train);
  const auto vdata = model.space().encode(valid);

  Rng order_rng = rng.child("order");
  Rng unk_rng = rng.child("unk");
  Rng enc_drop = rng.child("dropout", 0);
  Rng head_drop = rng.child("head-dropout", 0);
  const AdamConfig adam{cfg.lr};

  TrainLog log;
  double best_acc = vdata.empty() ? 0.0 : detail::accuracy_encoded(model, vdata);
  log.valid_accuracy.push_back(best_acc);
  if (track_train_accuracy) log.train_accuracy.push_back(detail::accuracy_encoded(model, data));
  ParamStore<Real> best = model.params();
  int since_best = 0;

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto& store = model.params();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      store.zero_grad();
      for (std::size_t b = start; b < stop; ++b) {
        const auto& tw = data[order[b]];
        const auto words = replace_hapax(model.space(), tw.words, cfg.unk_replace, unk_rng);
        total += model.loss(tw, words, true, true, {&enc_drop, &head_drop});
      }
      total += l2_penalty(store, cfg.l2);
      add_l2_grad(store, cfg.l2);
      adam_step(store, adam);
    }
    log.epoch_loss.push_back(total);
    if (track_train_accuracy) log.train_accuracy.push_back(detail::accuracy_encoded(model, data));
    const double acc = vdata.empty() ? 0.0 : detail::accuracy_encoded(model, vdata);
    log.valid_accuracy.push_back(acc);
    log::info("basis epoch ", epoch, " loss ", total, " valid acc ", acc);
    if (acc > best_acc) {
      best_acc = acc;
      best = store;
      log.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  store.copy_values_from(best);
  if (log_out) *log_out = std::move(log);
  return model;
}

}  // namespace sociotag
