#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "sociotag/alias.hpp"
#include "sociotag/analysis.hpp"
#include "sociotag/clustering.hpp"
#include "sociotag/corpus.hpp"
#include "sociotag/node_embed.hpp"
#include "sociotag/socialgraph.hpp"
#include "test_util.hpp"

using namespace sociotag;

// --- corpus -----------------------------------------------------------------

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_token("http://bit.ly/dP8rR8"), "<URL>");
  EXPECT_EQ(normalize_token("Hello"), "hello");
  EXPECT_EQ(normalize_token("a@b.com"), "<URL>");
  EXPECT_EQ(normalize_token("#win"), "#win");
  EXPECT_EQ(normalize_token("@Bob_1"), "<@MENTION>");
  EXPECT_EQ(normalize_token("www.Example.org"), "<URL>");
}

TEST(Normalize, MentionMustBeWholeToken) {
  EXPECT_EQ(normalize_token("@bob:"), "@bob:");
  EXPECT_EQ(normalize_token("@"), "@");
}

TEST(Normalize, Idempotent) {
  for (const char* s : {"http://x.co", "Hello", "a@b.com", "#Win", "@bob", "ÉCOLE", "<URL>", "<@MENTION>", ":)"}) {
    const auto once = normalize_token(s);
    EXPECT_EQ(normalize_token(once), once) << s;
  }
}

TEST(Tagset, RejectsDuplicatesAndEmpty) {
  EXPECT_THROW(Tagset({"N", "N"}), DataError);
  EXPECT_THROW(Tagset(std::vector<std::string>{}), DataError);
  const Tagset t({"N", "V"});
  EXPECT_EQ(t.index("V"), 1);
  EXPECT_FALSE(t.find("X"));
  EXPECT_THROW(t.index("X"), DataError);
}

TEST(Corpus, LoadsToyFile) {
  const auto tags = load_tagset(test_data("tagset.txt"));
  const auto c = load_corpus(test_data("toy_corpus.tsv"), tags);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c.num_tokens(), 16u);
  EXPECT_TRUE(c.labeled());
  EXPECT_EQ(c.authors(), (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(c.tweets[1].tokens[0].normalized, "<@MENTION>");
  EXPECT_EQ(c.tweets[1].tokens[3].normalized, "<URL>");
  EXPECT_EQ(tags.symbol((*c.tweets[0].tags)[3]), "#");
}

TEST(Corpus, WriteReadRoundTrip) {
  const auto tags = load_tagset(test_data("tagset.txt"));
  const auto c = load_corpus(test_data("toy_corpus.tsv"), tags);
  std::stringstream ss;
  write_corpus(ss, c);
  EXPECT_EQ(read_corpus(ss, tags, "mem"), c);
}

TEST(Corpus, UnknownTagReportsLine) {
  const Tagset tags({"N"});
  std::istringstream in("# tweet_id = 1\n# author_id = a\ndog\tN\ncat\tQ\n");
  try {
    read_corpus(in, tags, "bad.tsv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.file(), "bad.tsv");
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(Corpus, MissingAuthorIsDataError) {
  const Tagset tags({"N"});
  std::istringstream in("# tweet_id = 1\ndog\tN\n");
  EXPECT_THROW(read_corpus(in, tags, "x"), DataError);
}

TEST(Corpus, UnlabeledBlocks) {
  const Tagset tags({"N"});
  std::istringstream in("# tweet_id = 1\n# author_id = a\ndog\ncat\n");
  const auto c = read_corpus(in, tags, "x");
  EXPECT_FALSE(c.labeled());
}

TEST(Corpus, SubsetKeepsAuthors) {
  const auto c = load_corpus(test_data("toy_corpus.tsv"), load_tagset(test_data("tagset.txt")));
  const auto s = c.subset(std::set<std::string>{"a", "c"});
  EXPECT_EQ(s.authors(), (std::vector<std::string>{"a", "c"}));
  EXPECT_EQ(s.tagset, c.tagset);
}

TEST(Resources, BrownKeepsHigherCount) {
  const auto b = load_brown_clusters(test_data("brown.txt"));
  EXPECT_EQ(b.at("dog"), "0110");
  EXPECT_EQ(b.at("the"), "1110");
}

TEST(Resources, BrownRejectsBadPath) {
  TempDir dir;
  const auto p = dir.file("b.txt");
  std::ofstream(p) << "0120\tdog\t3\n";
  EXPECT_THROW(load_brown_clusters(p), DataError);
  std::ofstream(p) << std::string(17, '0') << "\tdog\t3\n";
  EXPECT_THROW(load_brown_clusters(p), DataError);
}

TEST(Resources, TagDictionaryOrder) {
  TempDir dir;
  const auto p = dir.file("d.txt");
  std::ofstream(p) << "run\tV\t3\nrun\tN\t3\nrun\tA\t5\nrun\tV\t1\n";
  const auto d = load_tag_dictionary(p, "ptb");
  const auto* e = d.find("run");
  ASSERT_NE(e, nullptr);
  ASSERT_EQ(e->size(), 3u);
  EXPECT_EQ((*e)[0], (TagCount{"A", 5}));
  EXPECT_EQ((*e)[1], (TagCount{"V", 4}));
  EXPECT_EQ((*e)[2], (TagCount{"N", 3}));
}

TEST(Resources, WordVectorsWithHeader) {
  const auto wv = load_word_vectors(test_data("vectors.txt"));
  EXPECT_EQ(wv.dim, 2u);
  EXPECT_EQ(wv.size(), 3u);
  EXPECT_DOUBLE_EQ(wv.find("dog")->at(1), -0.5);
  EXPECT_EQ(wv.find("cow"), nullptr);
}

TEST(Resources, WordVectorsRoundTrip) {
  TempDir dir;
  WordVectors wv;
  wv.dim = 2;
  wv.vectors = {{"x", {0.1, 1.0 / 3.0}}, {"y", {-2.5, 1e-300}}};
  save_word_vectors(wv, dir.file("v.txt"));
  const auto back = load_word_vectors(dir.file("v.txt"));
  EXPECT_EQ(back.vectors, wv.vectors);
}

TEST(Resources, WordVectorsRaggedRow) {
  TempDir dir;
  std::ofstream(dir.file("v.txt")) << "a 1 2\nb 3\n";
  EXPECT_THROW(load_word_vectors(dir.file("v.txt")), DataError);
}

// --- social graph -----------------------------------------------------------

TEST(Graph, EdgeListCanonicalization) {
  TempDir dir;
  std::ofstream(dir.file("e.txt")) << "a b\nb a\na a\n";
  const auto g = load_edge_list(dir.file("e.txt"));
  EXPECT_EQ(g.num_edges(), 1u);
  EXPECT_TRUE(g.has_edge(*g.find("a"), *g.find("b")));
}

TEST(Graph, MalformedLine) {
  TempDir dir;
  std::ofstream(dir.file("e.txt")) << "a b\nc\n";
  try {
    load_edge_list(dir.file("e.txt"));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Graph, SaveLoadRoundTrip) {
  TempDir dir;
  const auto g = load_edge_list(test_data("toy_edges.txt"));
  save_edge_list(g, dir.file("out.txt"));
  const auto back = load_edge_list(dir.file("out.txt"));
  const auto named = [](const SocialGraph& x) {
    std::set<std::pair<std::string, std::string>> s;
    for (auto [u, v] : x.edges()) s.emplace(std::min(x.name(u), x.name(v)), std::max(x.name(u), x.name(v)));
    return s;
  };
  EXPECT_EQ(named(back), named(g));
  EXPECT_EQ(back.num_nodes(), g.num_nodes());
}

TEST(Rewire, SwapExample) {
  const auto g = SocialGraph::from_named_edges({{"a", "b"}, {"c", "d"}});
  bool swapped = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto r = rewire_epochs(g, 1, rng);
    std::set<std::pair<std::string, std::string>> named;
    for (auto [u, v] : r.edges()) named.emplace(std::min(r.name(u), r.name(v)), std::max(r.name(u), r.name(v)));
    const std::set<std::pair<std::string, std::string>> orig{{"a", "b"}, {"c", "d"}};
    const std::set<std::pair<std::string, std::string>> ac{{"a", "c"}, {"b", "d"}};
    const std::set<std::pair<std::string, std::string>> ad{{"a", "d"}, {"b", "c"}};
    EXPECT_TRUE(named == orig || named == ac || named == ad);
    swapped |= named != orig;
  }
  EXPECT_TRUE(swapped);
}

TEST(Rewire, PreservesDegreesAndSimplicity) {
  Rng gen(3);
  auto planted = gen_planted_graph(120, 3, 0.2, 0.02, gen);
  const auto& g = planted.graph;
  Rng rng(9);
  const auto r = rewire_epochs(g, 5, rng);
  EXPECT_EQ(degree_sequence(r), degree_sequence(g));
  for (NodeId u = 0; u < g.num_nodes(); ++u) EXPECT_EQ(r.degree(u), g.degree(u));
  EXPECT_EQ(r.num_edges(), g.num_edges());
  for (auto [u, v] : r.edges()) EXPECT_NE(u, v);
  EXPECT_NE(r.edges(), g.edges());
}

TEST(Rewire, SeedDeterministic) {
  const auto g = load_edge_list(test_data("toy_edges.txt"));
  Rng a(5), b(5);
  EXPECT_EQ(rewire_epochs(g, 3, a), rewire_epochs(g, 3, b));
  EXPECT_THROW(rewire_epochs(g, 0, a), UsageError);
}

TEST(Graph, ConnectedAnnotatedPairs) {
  const auto g = SocialGraph::from_named_edges({{"a", "b"}, {"b", "c"}, {"c", "x"}});
  const std::set<std::string> ann{"a", "b", "c"};
  EXPECT_EQ(connected_annotated_pairs(g, ann).size(), 2u);
  EXPECT_EQ(connected_annotated_pairs(g, ann, 2).size(), 3u);
  EXPECT_THROW(connected_annotated_pairs(g, ann, 3), UsageError);
}

// --- alias sampling and LINE --------------------------------------------------

TEST(Alias, MatchesWeights) {
  const std::vector<double> w{1.0, 3.0, 0.0, 6.0};
  const AliasTable t(w);
  Rng rng(1);
  std::vector<int> counts(4, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[t.sample(rng)];
  EXPECT_EQ(counts[2], 0);
  EXPECT_NEAR(counts[0] / double(n), 0.1, 0.005);
  EXPECT_NEAR(counts[1] / double(n), 0.3, 0.005);
  EXPECT_NEAR(counts[3] / double(n), 0.6, 0.005);
}

TEST(Cosine, Values) {
  const std::vector<double> a{1, 1}, b{1, 0}, z{0, 0};
  EXPECT_NEAR(cosine_similarity(a, b), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(cosine_similarity(a, z), 0.0);
  const std::vector<double> c{1, 2, 3};
  EXPECT_THROW(cosine_similarity(a, c), UsageError);
}

namespace {

SocialGraph two_cliques(int n) {
  std::vector<std::pair<std::string, std::string>> e;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        e.emplace_back("c" + std::to_string(c) + "_" + std::to_string(i), "c" + std::to_string(c) + "_" + std::to_string(j));
      }
    }
  }
  return SocialGraph::from_named_edges(e);
}

}  // namespace

TEST(Line, SeparatesDisjointCliques) {
  const auto g = two_cliques(10);
  LineConfig cfg;
  cfg.dim = 8;
  Rng rng(11);
  LineStats stats;
  const auto emb = train_line(g, cfg, rng, &stats);
  double intra = 0, inter = 0;
  int ni = 0, nx = 0;
  for (const auto& a : g.nodes()) {
    for (const auto& b : g.nodes()) {
      if (a >= b) continue;
      const double c = cosine_similarity(*emb.find(a), *emb.find(b));
      if (a[1] == b[1]) {
        intra += c;
        ++ni;
      } else {
        inter += c;
        ++nx;
      }
    }
  }
  EXPECT_GT(intra / ni, inter / nx);
  EXPECT_LT(stats.last_decile_loss, stats.first_decile_loss);
}

TEST(Line, BitIdenticalPerSeed) {
  const auto g = two_cliques(6);
  LineConfig cfg;
  cfg.dim = 4;
  cfg.total_samples = 5000;
  Rng a(2), b(2);
  EXPECT_EQ(train_line(g, cfg, a).vectors, train_line(g, cfg, b).vectors);
}

TEST(Line, EmptyGraphIsDataError) {
  Rng rng(0);
  EXPECT_THROW(train_line(SocialGraph({"a"}, {}), LineConfig{}, rng), DataError);
}

TEST(Line, EmbeddingRoundTrip) {
  TempDir dir;
  NodeEmbedding e{2, {{"u", {0.25, -1.0 / 7.0}}, {"v", {3.0, 0.0}}}};
  save_node_embedding(e, dir.file("emb.txt"));
  EXPECT_EQ(load_node_embedding(dir.file("emb.txt")), e);
  EXPECT_EQ(embedding_hash(load_node_embedding(dir.file("emb.txt"))), embedding_hash(e));
}

// --- clustering and splits ----------------------------------------------------

TEST(KMeans, SplitsObviousClusters) {
  const std::vector<std::vector<double>> pts{{0, 0}, {0, 1}, {10, 10}, {10, 11}};
  Rng rng(4);
  const auto r = kmeans(pts, 2, rng);
  EXPECT_EQ(r.assignments[0], r.assignments[1]);
  EXPECT_EQ(r.assignments[2], r.assignments[3]);
  EXPECT_NE(r.assignments[0], r.assignments[2]);
}

TEST(KMeans, SseNonIncreasing) {
  Rng gen(8);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 300; ++i) pts.push_back({gen.uniform(-5, 5), gen.uniform(-5, 5), gen.uniform(-5, 5)});
  Rng rng(1);
  const auto r = kmeans(pts, 5, rng);
  ASSERT_GE(r.sse_history.size(), 2u);
  for (std::size_t i = 1; i < r.sse_history.size(); ++i) EXPECT_LE(r.sse_history[i], r.sse_history[i - 1] + 1e-9);
}

TEST(KMeans, BadK) {
  Rng rng(0);
  EXPECT_THROW(kmeans({{0.0}}, 2, rng), UsageError);
}

namespace {

Corpus author_corpus(const std::vector<std::string>& authors) {
  Corpus c;
  c.tagset = Tagset({"N"});
  for (const auto& a : authors) {
    Tweet t;
    t.tweet_id = a;
    t.author_id = a;
    t.tokens.emplace_back("x");
    t.tags = std::vector<int>{0};
    c.tweets.push_back(t);
  }
  return c;
}

}  // namespace

TEST(Split, RandomSevenThree) {
  std::vector<std::string> authors;
  for (int i = 0; i < 10; ++i) authors.push_back("u" + std::to_string(i));
  Rng rng(3);
  const auto s = random_split(author_corpus(authors), 7, rng);
  EXPECT_EQ(s.train_authors.size(), 7u);
  EXPECT_EQ(s.test_authors.size(), 3u);
  for (const auto& a : s.train_authors) EXPECT_EQ(s.test_authors.count(a), 0u);
}

TEST(Split, NetworkSplitPurityOnPlantedGraph) {
  Rng gen(12);
  const auto planted = gen_planted_graph(200, 2, 0.1, 0.005, gen);
  LineConfig cfg;
  cfg.dim = 16;
  Rng line_rng(1);
  const auto emb = train_line(planted.graph, cfg, line_rng);
  Rng rng(2);
  const auto s = network_split(emb, author_corpus(planted.graph.nodes()), rng);
  std::map<int, int> train_comm, test_comm;
  for (const auto& a : s.train_authors) ++train_comm[planted.communities.at(a)];
  for (const auto& a : s.test_authors) ++test_comm[planted.communities.at(a)];
  const auto purity = [](const std::map<int, int>& m) {
    int best = 0, total = 0;
    for (auto [c, n] : m) {
      best = std::max(best, n);
      total += n;
    }
    return double(best) / total;
  };
  EXPECT_GE(purity(train_comm), 0.9);
  EXPECT_GE(purity(test_comm), 0.9);
  EXPECT_GE(s.train_authors.size(), s.test_authors.size());
}

TEST(Split, JsonRoundTrip) {
  SplitSpec s;
  s.train_authors = {"a", "b"};
  s.test_authors = {"c"};
  s.provenance = SplitSpec::Provenance::network;
  s.seed = 42;
  EXPECT_EQ(split_from_json(to_json(s)), s);
  auto bad = to_json(s);
  bad["test"].push_back("a");
  EXPECT_THROW(split_from_json(bad), DataError);
}
