#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <gtest/gtest.h>

#include "sociotag/analysis.hpp"
#include "sociotag/checkpoint.hpp"
#include "sociotag/experiments.hpp"
#include "sociotag/naive.hpp"
#include "sociotag/report.hpp"
#include "sociotag/social_attention.hpp"
#include "sociotag/svg.hpp"
#include "test_util.hpp"

using namespace sociotag;
using nlohmann::json;

namespace {

BasisConfig tiny_basis() {
  BasisConfig c;
  c.char_dim = 3;
  c.char_hidden = 3;
  c.word_dim = 4;
  c.word_hidden = 4;
  c.fc_dim = 5;
  c.dropout = 0.0;
  c.epochs = 2;
  c.surface_features = false;
  c.pretrained = false;
  return c;
}

Corpus toy_corpus() { return load_corpus(test_data("toy_corpus.tsv"), load_tagset(test_data("tagset.txt"))); }

std::shared_ptr<const NodeEmbedding> toy_embedding() {
  auto e = std::make_shared<NodeEmbedding>();
  e->dim = 3;
  e->vectors = {{"a", {0.5, -0.2, 0.1}}, {"b", {0.4, -0.1, 0.3}}, {"c", {-0.6, 0.2, 0.0}}};
  return e;
}

SocialAttentionModel<double> toy_social(int K, GateMode gate, bool shared = false) {
  SocialConfig cfg;
  cfg.basis = tiny_basis();
  cfg.K = K;
  cfg.gate = gate;
  cfg.shared_encoder = shared;
  const auto c = toy_corpus();
  SocialAttentionModel<double> m(FeatureSpace::build(c, nullptr, cfg.basis), cfg, toy_embedding());
  m.init(Rng(1));
  return m;
}

}  // namespace

// --- social attention -------------------------------------------------------------------

TEST(Attention, FromLogits) {
  const std::vector<double> z{std::log(2.0), 0.0};
  const auto p = attention_from_logits<double>(z, GateMode::softmax);
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-12);
  const auto s = attention_from_logits<double>(std::vector<double>{0.0, 0.0}, GateMode::sigmoid);
  EXPECT_DOUBLE_EQ(s[0], 0.5);
}

TEST(Attention, ZeroGateIsUniform) {
  auto m = toy_social(3, GateMode::softmax);
  std::fill(m.params()[m.phi_id()].value.begin(), m.params()[m.phi_id()].value.end(), 0.0);
  for (const char* a : {"a", "c", "nobody"}) {
    for (double p : attention_weights(m, a)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  }
  const auto u = expert_utilization(m, {"a", "b", "c", "d"});
  for (double w : u.mean_weight) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
}

TEST(Attention, FallbackSharedByMissingAuthors) {
  const auto m = toy_social(2, GateMode::softmax);
  EXPECT_FALSE(m.embedded("d"));
  EXPECT_EQ(attention_weights(m, "d"), attention_weights(m, "zz"));
  EXPECT_NE(attention_weights(m, "a"), attention_weights(m, "c"));
}

TEST(Attention, ShiftInvariant) {
  auto m = toy_social(3, GateMode::softmax);
  const auto before = attention_weights(m, "a");
  for (auto& b : m.params()[m.bias_id()].value) b += 5.0;
  const auto after = attention_weights(m, "a");
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(before[k], after[k], 1e-12);
}

TEST(Mixture, HandExample) {
  std::vector<Mat<double>> rows(2, Mat<double>(1, 2));
  rows[0].data = {0.8, 0.2};
  rows[1].data = {0.2, 0.8};
  const std::vector<double> pi{0.5, 0.5};
  const auto m = mix_rows<double>(pi, rows, GateMode::softmax);
  EXPECT_NEAR(m(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(m(0, 1), 0.5, 1e-15);
  const std::vector<double> one{1.0, 0.0};
  EXPECT_EQ(mix_rows<double>(one, rows, GateMode::softmax).data, rows[0].data);
}

TEST(Mixture, RowsAreDistributions) {
  for (auto gate : {GateMode::softmax, GateMode::sigmoid}) {
    const auto m = toy_social(3, gate);
    const auto p = mixture_predict(m, toy_corpus().tweets[2], "b");
    for (std::size_t i = 0; i < p.rows; ++i) {
      double s = 0;
      for (double x : p.row(i)) s += x;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Mixture, GradientCheckAllModes) {
  const auto c = toy_corpus();
  for (auto gate : {GateMode::softmax, GateMode::sigmoid}) {
    for (bool shared : {false, true}) {
      auto m = toy_social(2, gate, shared);
      Rng jitter(3);
      for (auto& p : m.params()) {
        for (auto& v : p.value) v += jitter.uniform(-0.3, 0.3);
      }
      for (const auto& t : {c.tweets[0], c.tweets[3]}) {  // embedded author, fallback author
        const auto tw = m.space().encode(t);
        const auto r = grad_check(m.params(), [&](bool acc) { return m.loss(tw, acc); });
        EXPECT_LT(r.max_rel_error, 1e-4) << to_string(gate) << " shared=" << shared << " " << r.worst_param << "["
                                         << r.worst_index << "] a=" << r.analytic << " n=" << r.numeric;
      }
    }
  }
}

TEST(Social, K1ReproducesBasis) {
  const auto c = toy_corpus();
  auto basis = tiny_basis();
  basis.dropout = 0.3;
  basis.epochs = 4;
  basis.patience = 4;
  basis.lr = 0.02;
  TrainLog lb, ls;
  const auto b = train_basis<double>(c, c, nullptr, basis, Rng(5), &lb);
  SocialConfig sc;
  sc.basis = basis;
  sc.K = 1;
  const auto s = train_social<double>(c, c, toy_embedding(), nullptr, sc, Rng(5), &ls);
  EXPECT_EQ(lb.valid_accuracy, ls.valid_accuracy);
  for (const auto& t : c.tweets) EXPECT_EQ(b.tag(t), s.tag(t));
}

TEST(Social, CheckpointValidatesEmbedding) {
  const auto m = toy_social(2, GateMode::sigmoid);
  const auto j = m.to_json();
  const auto back = SocialAttentionModel<double>::from_json(j, nullptr, toy_embedding());
  EXPECT_EQ(attention_weights(back, "a"), attention_weights(m, "a"));
  auto other = std::make_shared<NodeEmbedding>(*toy_embedding());
  other->vectors["a"][0] = 0.0;
  EXPECT_THROW(SocialAttentionModel<double>::from_json(j, nullptr, other), DataError);
}

TEST(Social, ConfigAndErrors) {
  EXPECT_EQ(default_experts("retweet"), 4);
  EXPECT_EQ(default_experts("mention"), 3);
  EXPECT_THROW(default_experts("email"), UsageError);
  EXPECT_THROW(SocialConfig::from_json({{"K", 0}}), UsageError);
  EXPECT_THROW(SocialConfig::from_json({{"gate", "relu"}}), UsageError);
  SocialConfig cfg;
  cfg.basis = tiny_basis();
  EXPECT_THROW(train_social<double>(Corpus{}, Corpus{}, toy_embedding(), nullptr, cfg, Rng(0)), UsageError);
}

// --- analysis -------------------------------------------------------------------------------

TEST(Assortativity, HandExample) {
  const std::map<std::string, double> acc{{"a", 1.0}, {"b", 0.5}, {"c", 0.5}, {"d", 0.0}};
  auto g = SocialGraph::from_named_edges({{"a", "b"}, {"c", "d"}});
  EXPECT_DOUBLE_EQ(assortativity(acc, g), 0.25);
  const auto g2 = SocialGraph::from_named_edges({{"a", "b"}, {"c", "d"}, {"x", "y"}});
  EXPECT_DOUBLE_EQ(assortativity(acc, g2), 0.25);
  const std::map<std::string, double> flat{{"a", 0.7}, {"b", 0.7}, {"c", 0.7}, {"d", 0.7}};
  EXPECT_EQ(assortativity(flat, g), 0.0);
  EXPECT_THROW(assortativity({{"a", 1.0}}, g), DataError);
}

TEST(Rewired, EmpiricalP) {
  EXPECT_DOUBLE_EQ(empirical_p_value(1.0, {2.0, 3.0, 0.5}), 2.0 / 4.0);
  const auto g = load_edge_list(test_data("toy_edges.txt"));
  const auto r = rewired_baseline([](const SocialGraph&) { return 1.0; }, g, 2, 5, Rng(1));
  EXPECT_EQ(r.rewired_samples.size(), 5u);
  EXPECT_DOUBLE_EQ(r.empirical_p, 1.0);
  EXPECT_THROW(rewired_baseline([](const SocialGraph&) { return 1.0; }, g, 2, 0, Rng(1)), UsageError);
}

TEST(Rewired, DeterministicAndWorkerIndependent) {
  Rng gen(4);
  const auto planted = gen_planted_graph(60, 2, 0.3, 0.02, gen);
  std::map<std::string, double> acc;
  for (const auto& [a, c] : planted.communities) acc[a] = c == 0 ? 0.9 : 0.5;
  const GraphMetric f = [&](const SocialGraph& g) { return assortativity(acc, g); };
  const auto a = rewired_baseline(f, planted.graph, 3, 6, Rng(7), 1);
  const auto b = rewired_baseline(f, planted.graph, 3, 6, Rng(7), 3);
  EXPECT_EQ(a.rewired_samples, b.rewired_samples);
  EXPECT_LT(a.observed, a.mean());
}

TEST(Rewired, SweepCsvAndSvg) {
  const auto g = load_edge_list(test_data("pair_edges.txt"));
  const std::map<std::string, double> acc{{"a", 1.0}, {"b", 0.5}, {"c", 0.5}, {"d", 0.0}};
  const auto pts = rewiring_sweep([&](const SocialGraph& gr) { return assortativity(acc, gr); }, g, 3, 4, Rng(2));
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[2].epoch, 3);
  EXPECT_DOUBLE_EQ(pts[0].observed, 0.25);
  TempDir dir;
  write_sweep_csv(pts, dir.file("s.csv"));
  std::ifstream in(dir.file("s.csv"));
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "epoch,observed,mean,std");
  const auto svg = sweep_svg(pts, "t");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("polyline"), std::string::npos);
}

TEST(AttentionSimilarity, HandExample) {
  const auto g = SocialGraph::from_named_edges({{"i", "j"}});
  const std::map<std::string, std::vector<double>> pi{{"i", {0.9, 0.1}}, {"j", {0.6, 0.4}}};
  EXPECT_NEAR(attention_similarity(pi, g), 0.6, 1e-15);
  const std::map<std::string, std::vector<double>> same{{"i", {0.3, 0.7}}, {"j", {0.3, 0.7}}};
  EXPECT_EQ(attention_similarity(same, g), 0.0);
  EXPECT_THROW(attention_similarity({{"i", {1.0}}}, g), DataError);
}

TEST(AttentionSimilarity, ExcludesFallbackAuthors) {
  const auto m = toy_social(2, GateMode::softmax);
  const auto g = SocialGraph::from_named_edges({{"a", "b"}, {"c", "d"}, {"d", "e"}});
  const auto pi = embedded_attention(m, g);
  EXPECT_EQ(pi.size(), 3u);
  EXPECT_EQ(pi.count("d"), 0u);
  double expect = 0;
  const auto pa = attention_weights(m, "a"), pb = attention_weights(m, "b");
  for (int k = 0; k < 2; ++k) expect += std::abs(pa[k] - pb[k]);
  EXPECT_NEAR(attention_similarity(m, g), expect, 1e-15);
  EXPECT_LE(attention_similarity(m, g), 2.0);
}

TEST(Planted, EdgeRatio) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto p = gen_planted_graph(200, 2, 0.1, 0.005, rng);
    double intra = 0, inter = 0;
    for (auto [u, v] : p.graph.edges()) {
      (p.communities.at(p.graph.name(u)) == p.communities.at(p.graph.name(v)) ? intra : inter) += 1;
    }
    const double ratio = intra / std::max(inter, 1.0);
    EXPECT_GT(ratio, 19.8 / 2) << seed;
    EXPECT_LT(ratio, 19.8 * 2) << seed;
  }
}

TEST(Planted, Extremes) {
  Rng rng(1);
  const auto p = gen_planted_graph(20, 2, 1.0, 0.0, rng);
  EXPECT_EQ(p.graph.num_edges(), 2u * 45u);
  for (auto [u, v] : p.graph.edges()) {
    EXPECT_EQ(p.communities.at(p.graph.name(u)), p.communities.at(p.graph.name(v)));
  }
  EXPECT_THROW(gen_planted_graph(20, 2, 0.1, 0.2, rng), UsageError);
}

TEST(Homophilous, DivergenceControlsConventions) {
  std::map<std::string, int> comms;
  for (int i = 0; i < 40; ++i) comms["u" + std::to_string(i)] = i % 2;
  SynthVocabConfig v;
  v.ambiguous_words = 5;
  v.ambiguous_rate = 0.5;
  const auto tags = default_synthetic_tagset();

  // Per word, per community: tag counts.
  const auto conventions = [&](double divergence) {
    Rng rng(3);
    const auto c = gen_homophilous_corpus(comms, tags, v, divergence, 10, rng);
    std::map<std::string, std::map<int, std::map<int, int>>> counts;
    std::map<std::string, std::set<int>> tag_sets;
    for (const auto& t : c.tweets) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        counts[t.tokens[i].normalized][comms.at(t.author_id)][(*t.tags)[i]]++;
        tag_sets[t.tokens[i].normalized].insert((*t.tags)[i]);
      }
    }
    std::map<std::string, std::map<int, std::map<int, int>>> ambiguous;
    for (auto& [w, s] : tag_sets) {
      if (s.size() > 1) ambiguous[w] = counts[w];
    }
    return ambiguous;
  };

  const auto det = conventions(1.0);
  EXPECT_EQ(det.size(), 5u);
  for (const auto& [w, by_comm] : det) {
    ASSERT_EQ(by_comm.size(), 2u);
    const auto& c0 = by_comm.at(0);
    const auto& c1 = by_comm.at(1);
    EXPECT_EQ(c0.size(), 1u) << w;
    EXPECT_EQ(c1.size(), 1u) << w;
    EXPECT_NE(c0.begin()->first, c1.begin()->first) << w;
  }
  Rng rng(0);
  EXPECT_THROW(gen_homophilous_corpus({{"a", 0}}, tags, v, 0.5, 1, rng), UsageError);
}

TEST(Homophilous, NaiveTaggerFavoursTrainingCommunity) {
  SynthConfig cfg;
  const auto b = generate_benchmark(cfg, Rng(2));
  ASSERT_EQ(b.corpus.size(), 600u);
  const auto model = train_naive(b.corpus.subset(b.community(0)));
  const auto a = b.corpus.subset(b.community(0));
  const auto other = b.corpus.subset(b.community(1));
  EXPECT_GT(evaluate(model, a), evaluate(model, other) + 0.05);
  EXPECT_EQ(generate_benchmark(cfg, Rng(2)).corpus, b.corpus);
}

// --- checkpoint and report -------------------------------------------------------------------

TEST(Checkpoint, HashValidation) {
  TempDir dir;
  const json cfg = {{"lr", 0.1}, {"seed", 3}};
  save_json(make_checkpoint("naive", json::object(), cfg), dir.file("m.json"));
  EXPECT_NO_THROW(load_checkpoint(dir.file("m.json"), "naive"));
  EXPECT_THROW(load_checkpoint(dir.file("m.json"), "crf"), DataError);
  auto j = load_json(dir.file("m.json"));
  j["config"]["lr"] = 0.2;
  save_json(j, dir.file("m.json"));
  EXPECT_THROW(load_checkpoint(dir.file("m.json"), "naive"), DataError);
  std::ofstream(dir.file("bad.json")) << "{oops";
  EXPECT_THROW(load_json(dir.file("bad.json")), DataError);
}

TEST(Report, Schema) {
  const auto r = make_report("assort", {{"a", 1}}, 7, {{"observed", 0.25}});
  EXPECT_EQ(r.at("schema_version"), kReportSchemaVersion);
  EXPECT_EQ(r.at("seed"), 7);
  EXPECT_EQ(r.at("config_hash"), config_hash({{"a", 1}}));
  EXPECT_EQ(config_hash({{"a", 1}}).size(), 16u);
}

// --- command line -----------------------------------------------------------------------------

namespace {

int run_cli(const std::string& args) {
  const int rc = std::system((std::string(SOCIOTAG_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Cli, AssortOnPairInputs) {
  TempDir dir;
  ASSERT_EQ(run_cli("--out " + dir.file("o") + " --seed 1 assort --accuracies " + test_data("pair_accuracies.tsv") +
                    " --edges " + test_data("pair_edges.txt") + " --samples 3 --epochs 2 --sweep 2"),
            0);
  const auto r = load_json(dir.file("o/report.json"));
  EXPECT_DOUBLE_EQ(r.at("metrics").at("observed").get<double>(), 0.25);
  EXPECT_EQ(r.at("seed"), 1);
  EXPECT_EQ(r.at("experiment"), "assort");
  EXPECT_TRUE(std::filesystem::exists(dir.file("o/sweep.csv")));
  EXPECT_TRUE(std::filesystem::exists(dir.file("o/sweep.svg")));
}

TEST(Cli, MissingPathIsUsageErrorWithoutOutputs) {
  TempDir dir;
  EXPECT_EQ(run_cli("--out " + dir.file("o") + " train naive --train /nonexistent/c.tsv --tagset " +
                    test_data("tagset.txt")),
            1);
  EXPECT_FALSE(std::filesystem::exists(dir.file("o")));
  EXPECT_EQ(run_cli("--out " + dir.file("o") + " --config /nonexistent.json synth"), 1);
  EXPECT_EQ(run_cli("--out " + dir.file("o") + " nosuchcommand"), 1);
  EXPECT_FALSE(std::filesystem::exists(dir.file("o")));
}

TEST(Cli, MalformedDataIsExit2) {
  TempDir dir;
  std::ofstream(dir.file("bad.tsv")) << "a\n";
  EXPECT_EQ(run_cli("--out " + dir.file("o") + " assort --accuracies " + dir.file("bad.tsv") + " --edges " +
                    test_data("pair_edges.txt")),
            2);
}

TEST(Cli, TrainEvalRoundTrip) {
  TempDir dir;
  const auto data = " --tagset " + test_data("tagset.txt");
  ASSERT_EQ(run_cli("--out " + dir.file("m") + " train crf --train " + test_data("toy_corpus.tsv") + " --valid " +
                    test_data("toy_corpus.tsv") + data),
            0);
  ASSERT_EQ(run_cli("--out " + dir.file("e") + " eval --model " + dir.file("m/model.json") + " --corpus " +
                    test_data("toy_corpus.tsv") + data),
            0);
  const auto r = load_json(dir.file("e/report.json"));
  EXPECT_GT(r.at("metrics").at("accuracy").get<double>(), 0.5);
  EXPECT_TRUE(std::filesystem::exists(dir.file("e/per_author.tsv")));
  // Tagset defaults to the checkpoint's.
  ASSERT_EQ(run_cli("--out " + dir.file("e2") + " eval --model " + dir.file("m/model.json") + " --corpus " +
                    test_data("toy_corpus.tsv")),
            0);
  EXPECT_EQ(load_json(dir.file("e2/report.json")).at("metrics").at("accuracy"), r.at("metrics").at("accuracy"));
}

TEST(Cli, ConfigFileAndOverrides) {
  TempDir dir;
  std::ofstream(dir.file("c.json")) << R"({"synth": {"authors": 30, "tweets_per_author": 1}, "seed": 4})";
  ASSERT_EQ(run_cli("--out " + dir.file("o") + " --config " + dir.file("c.json") + " synth --authors 20"), 0);
  const auto r = load_json(dir.file("o/report.json"));
  EXPECT_EQ(r.at("metrics").at("authors"), 20);
  EXPECT_EQ(r.at("metrics").at("tweets"), 20);
  EXPECT_EQ(r.at("seed"), 4);
  EXPECT_EQ(r.at("config").at("synth").at("tweets_per_author"), 1);
}
