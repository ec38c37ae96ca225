// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Arguments select
// criteria by number (default: all). Exit status is 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sociotag/sociotag.hpp"

using namespace sociotag;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome check(bool ok, const std::string& detail) { return {ok ? Status::pass : Status::fail, detail}; }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// --- random toy instances ---------------------------------------------------------------------

const std::vector<std::string> kToyWords{"the", "dog", "cat", "runs", "@amy", "lol", "http://x.co", "Fast", "#tag", "!"};

Corpus random_corpus(Rng& rng, std::size_t n_tweets, std::size_t n_tags, const std::vector<std::string>& authors) {
  Corpus c;
  std::vector<std::string> tags;
  for (std::size_t i = 0; i < n_tags; ++i) tags.push_back("T" + std::to_string(i));
  c.tagset = Tagset(tags);
  for (std::size_t n = 0; n < n_tweets; ++n) {
    Tweet t;
    t.tweet_id = "t" + std::to_string(n);
    t.author_id = authors[rng.uniform_int(authors.size())];
    const std::size_t T = 1 + rng.uniform_int(5);
    std::vector<int> gold;
    for (std::size_t i = 0; i < T; ++i) {
      t.tokens.emplace_back(kToyWords[rng.uniform_int(kToyWords.size())]);
      gold.push_back(static_cast<int>(rng.uniform_int(n_tags)));
    }
    t.tags = gold;
    c.tweets.push_back(std::move(t));
  }
  return c;
}

template <typename Store>
void jitter(Store& store, Rng& rng, double scale) {
  for (auto& p : store) {
    for (auto& v : p.value) v += rng.uniform(-scale, scale);
  }
}

std::shared_ptr<const LexicalResources> toy_resources() {
  auto res = std::make_shared<LexicalResources>();
  const std::string dir = SOCIOTAG_TEST_DATA;
  res->brown_paths = load_brown_clusters(dir + "/brown.txt");
  res->tag_dicts.push_back(load_tag_dictionary(dir + "/tagdict.txt", "ptb"));
  res->word_vectors = load_word_vectors(dir + "/vectors.txt");
  return res;
}

BasisConfig oracle_basis(Rng& rng) {
  BasisConfig c;
  c.char_dim = 2 + rng.uniform_int(3);
  c.char_hidden = 2 + rng.uniform_int(3);
  c.word_dim = 3 + rng.uniform_int(4);
  c.word_hidden = 3 + rng.uniform_int(4);
  c.fc_dim = 4 + rng.uniform_int(5);
  c.dropout = 0.0;
  c.epochs = 1;
  return c;
}

constexpr double kGradTol = 1e-4;

Outcome criterion1() {
  double worst_crf = 0, worst_basis = 0, worst_social = 0;
  Rng rng(101);
  for (int inst = 0; inst < 5; ++inst) {
    const auto c = random_corpus(rng, 3, 3 + rng.uniform_int(2), {"a"});
    CrfConfig cfg;
    cfg.epochs = 1;
    Rng train_rng = rng.child("crf", static_cast<std::uint64_t>(inst));
    auto m = train_crf(c, nullptr, cfg, train_rng);
    jitter(m.params(), rng, 0.5);
    for (const auto& t : c.tweets) {
      const auto ids = m.feature_ids(t);
      worst_crf = std::max(worst_crf, oracle::finite_difference_error<double>(
                                          m.params(), [&](bool acc) { return m.nll(ids, *t.tags, acc); }));
    }
  }
  const auto res = toy_resources();
  for (int inst = 0; inst < 4; ++inst) {
    const auto c = random_corpus(rng, 3, 3 + rng.uniform_int(2), {"a"});
    auto cfg = oracle_basis(rng);
    cfg.surface_features = inst % 2 == 0;
    cfg.pretrained = inst % 2 == 0;
    BasisTagger<double> m(FeatureSpace::build(c, res, cfg), cfg);
    m.init(rng.child("basis", static_cast<std::uint64_t>(inst)));
    jitter(m.params(), rng, 0.3);
    const auto tw = m.space().encode(c.tweets[0]);
    worst_basis = std::max(worst_basis, oracle::finite_difference_error<double>(
                                            m.params(), [&](bool acc) { return m.loss(tw, acc); }));
  }
  auto emb = std::make_shared<NodeEmbedding>();
  emb->dim = 4;
  for (const char* a : {"a", "b", "c"}) {
    for (std::size_t d = 0; d < emb->dim; ++d) emb->vectors[a].push_back(rng.uniform(-1, 1));
  }
  int inst = 0;
  for (auto gate : {GateMode::softmax, GateMode::sigmoid}) {
    for (bool shared : {false, true}) {
      const auto c = random_corpus(rng, 4, 4, {"a", "b", "zz"});
      SocialConfig cfg;
      cfg.basis = oracle_basis(rng);
      cfg.basis.surface_features = shared;
      cfg.K = 2 + inst % 2;
      cfg.gate = gate;
      cfg.shared_encoder = shared;
      SocialAttentionModel<double> m(FeatureSpace::build(c, res, cfg.basis), cfg, emb);
      m.init(rng.child("social", static_cast<std::uint64_t>(inst++)));
      jitter(m.params(), rng, 0.3);
      for (const char* author : {"a", "zz"}) {
        auto t = c.tweets[0];
        t.author_id = author;
        const auto tw = m.space().encode(t);
        worst_social = std::max(worst_social, oracle::finite_difference_error<double>(
                                                  m.params(), [&](bool acc) { return m.loss(tw, acc); }));
      }
    }
  }
  const double worst = std::max({worst_crf, worst_basis, worst_social});
  return check(worst < kGradTol, "max rel error crf " + fmt("%.2e", worst_crf) + ", basis " +
                                     fmt("%.2e", worst_basis) + ", social " + fmt("%.2e", worst_social));
}

Outcome criterion2() {
  Rng rng(202);
  double worst = 0;
  int viterbi_mismatch = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const std::size_t T = 1 + rng.uniform_int(4), L = 1 + rng.uniform_int(4);
    const auto inst = oracle::random_crf(T, L, rng);
    worst = std::max(worst, std::abs(crf_log_partition(inst.emissions, inst.tr) -
                                     oracle::brute_log_z(inst.emissions, inst.tr)));
    if (viterbi_decode(inst.emissions, inst.tr) != oracle::brute_viterbi(inst.emissions, inst.tr)) ++viterbi_mismatch;
  }
  return check(worst < 1e-8 && viterbi_mismatch == 0, std::to_string(n) + " instances, max |log Z diff| " +
                                                          fmt("%.2e", worst) + ", viterbi mismatches " +
                                                          std::to_string(viterbi_mismatch));
}

Outcome criterion3() {
  Rng gen(303);
  int graphs = 0, failures = 0;
  for (int i = 0; i < 12; ++i) {
    const std::size_t n = 20 + gen.uniform_int(481);
    const int c = 1 + static_cast<int>(gen.uniform_int(4));
    const double p_in = gen.uniform(0.02, 0.2);
    const auto planted = gen_planted_graph(n, c, p_in, p_in * gen.uniform(0.0, 0.3), gen);
    const auto& g = planted.graph;
    if (g.num_edges() < 2) continue;
    ++graphs;
    Rng a = gen.child("rewire", static_cast<std::uint64_t>(i));
    Rng b = a;
    const auto r = rewire_epochs(g, 1 + i % 5, a);
    bool ok = degree_sequence(r) == degree_sequence(g) && r.num_edges() == g.num_edges();
    for (NodeId u = 0; u < g.num_nodes(); ++u) ok = ok && r.degree(u) == g.degree(u);
    std::set<std::pair<NodeId, NodeId>> seen;
    for (auto [u, v] : r.edges()) ok = ok && u != v && seen.emplace(std::min(u, v), std::max(u, v)).second;
    ok = ok && rewire_epochs(g, 1 + i % 5, b) == r;
    if (!ok) ++failures;
  }
  return check(graphs >= 10 && failures == 0,
               std::to_string(graphs) + " graphs, " + std::to_string(failures) + " invariant violations");
}

constexpr int kSeeds = 10;

Outcome criterion4() {
  int hits = 0;
  std::ostringstream ps;
  for (int s = 0; s < kSeeds; ++s) {
    const Rng rng(static_cast<std::uint64_t>(s));
    const auto b = generate_benchmark(SynthConfig{}, rng.child("benchmark"));
    const auto run = assortativity_experiment(b, 10, 20, rng.child("assortativity"));
    const auto& cmp = run.comparison;
    const bool hit = cmp.observed < cmp.mean() && cmp.empirical_p < 0.05;
    hits += hit;
    ps << (s ? " " : "") << fmt("%.3f", cmp.empirical_p);
  }
  return check(hits >= 8, std::to_string(hits) + "/" + std::to_string(kSeeds) + " seeds with p < 0.05 (p: " +
                              ps.str() + ")");
}

Outcome criterion5() {
  const Rng rng(5);
  const auto b = generate_benchmark(SynthConfig{}, rng.child("benchmark"));
  const auto run = split_gap_experiment(b, 10, LineConfig{}, CrfConfig{}, rng.child("split-gap"));
  const double net = SplitGapRun::mean(run.network_accuracy), rnd = SplitGapRun::mean(run.random_accuracy);
  return check(net < rnd && run.gap() >= 0.01, "network " + fmt("%.4f", net) + ", random " + fmt("%.4f", rnd) +
                                                    ", gap " + fmt("%.2f", 100 * run.gap()) + " points");
}

Outcome criterion6() {
  SynthConfig sc;
  sc.authors = 40;
  const Rng rng(6);
  const auto b = generate_benchmark(sc, rng.child("benchmark"));
  const auto [train, valid] = holdout_tweets(b.corpus, 0.2, rng.child("holdout"));
  auto basis = toy_basis_config();
  basis.epochs = 4;
  basis.dropout = 0.35;
  TrainLog lb, ls;
  const auto plain = train_basis<double>(train, valid, nullptr, basis, rng.child("train"), &lb);
  SocialConfig cfg;
  cfg.basis = basis;
  cfg.K = 1;
  auto emb = std::make_shared<NodeEmbedding>();
  emb->dim = 2;
  for (const auto& a : b.corpus.authors()) emb->vectors[a] = {0.5, -0.5};
  const auto social = train_social<double>(train, valid, emb, nullptr, cfg, rng.child("train"), &ls);
  const double diff = std::abs(lb.valid_accuracy[static_cast<std::size_t>(lb.best_epoch)] -
                               ls.valid_accuracy[static_cast<std::size_t>(ls.best_epoch)]);
  std::size_t mismatches = 0;
  for (const auto& t : valid.tweets) {
    const auto p = plain.tag(t), q = social.tag(t);
    for (std::size_t i = 0; i < p.size(); ++i) mismatches += p[i] != q[i];
  }
  return check(diff < 1e-6 && mismatches == 0, "valid accuracy diff " + fmt("%.1e", diff) + ", " +
                                                   std::to_string(mismatches) + " differing predictions");
}

Outcome criterion7() {
  int hits = 0;
  std::ostringstream detail;
  SocialConfig cfg;
  cfg.basis = toy_basis_config();
  cfg.K = 2;
  for (int s = 0; s < kSeeds; ++s) {
    const Rng rng(static_cast<std::uint64_t>(s));
    const auto b = generate_benchmark(SynthConfig{}, rng.child("benchmark"));
    const auto run = attention_experiment<float>(b, cfg, LineConfig{}, 10, 20, rng.child("attention"));
    hits += run.comparison.observed < run.comparison.mean();
    detail << (s ? " " : "") << fmt("%.3f", run.comparison.observed) << "/" << fmt("%.3f", run.comparison.mean());
  }
  return check(hits >= 8, std::to_string(hits) + "/" + std::to_string(kSeeds) +
                              " seeds below rewired (observed/rewired: " + detail.str() + ")");
}

Outcome criterion8() {
  Rng rng(808);
  const std::size_t fan_in = 300, fan_out = 200;
  const auto w = xavier_init<double>(fan_out, fan_in, rng);
  double mean = 0, var = 0;
  for (double x : w) mean += x;
  mean /= static_cast<double>(w.size());
  for (double x : w) var += (x - mean) * (x - mean);
  var /= static_cast<double>(w.size() - 1);
  const double target = 2.0 / (fan_in + fan_out);
  const double var_err = std::abs(var - target) / target;

  const auto mask = dropout_mask<double>(100000, 0.35, rng, true);
  const double zero_rate = static_cast<double>(std::count(mask.begin(), mask.end(), 0.0)) / 1e5;

  ParamStore<double> store;
  const auto id = store.add("p", 4, 5);
  for (auto& x : store[id].value) x = rng.uniform(-1, 1);
  const auto before = store[id].value;
  for (int i = 0; i < 10; ++i) {
    store.zero_grad();
    adam_step(store);
  }
  const bool fixed = store[id].value == before;
  return check(var_err < 0.1 && std::abs(zero_rate - 0.35) <= 0.01 && fixed,
               "xavier var rel err " + fmt("%.3f", var_err) + ", dropout zero rate " + fmt("%.4f", zero_rate) +
                   ", adam fixed point " + (fixed ? "exact" : "moved"));
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

Outcome criterion9() {
  const char* train_path = env("SOCIOTAG_OCT27_TRAIN");
  const char* dev_path = env("SOCIOTAG_OCT27_DEV");
  const char* test_path = env("SOCIOTAG_DAILY547");
  const char* tagset_path = env("SOCIOTAG_TAGSET");
  if (!train_path || !dev_path || !test_path || !tagset_path) {
    return {Status::skip,
            "set SOCIOTAG_OCT27_TRAIN, SOCIOTAG_OCT27_DEV, SOCIOTAG_DAILY547 and SOCIOTAG_TAGSET to run"};
  }
  const auto tagset = load_tagset(tagset_path);
  const auto train = load_corpus(train_path, tagset);
  const auto dev = load_corpus(dev_path, tagset);
  const auto test = load_corpus(test_path, tagset);
  auto res = std::make_shared<LexicalResources>();
  if (const char* p = env("SOCIOTAG_WORD_VECTORS")) res->word_vectors = load_word_vectors(p);
  if (const char* p = env("SOCIOTAG_BROWN_CLUSTERS")) res->brown_paths = load_brown_clusters(p);
  BasisConfig cfg;
  cfg.pretrained = res->word_vectors.size() > 0;
  const auto model = train_basis<float>(train, dev, res, cfg, Rng(9));
  const double acc = evaluate(model, test);
  return check(acc >= 0.88, "DAILY547 token accuracy " + fmt("%.4f", acc));
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(n)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* label = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    std::printf("%s criterion %d: %s [%.1fs]\n", label, n, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.status == Status::fail;
  }
  return failures ? 1 : 0;
}
