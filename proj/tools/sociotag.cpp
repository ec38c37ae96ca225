// sociotag: experiment runner.
//
// Every subcommand resolves a JSON config (file given by --config, then
// command-line flags override individual keys), checks that all referenced
// input files exist, runs, and writes <out>/report.json.
//
// Exit status: 0 success, 1 usage or config error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sociotag/sociotag.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sociotag;

namespace {

// Keys whose values name input files.
const std::vector<std::string> kPathKeys = {"corpus", "tagset",         "edges",     "train",
                                            "valid",  "split",          "embedding", "model",
                                            "accuracies", "word_vectors", "brown_clusters"};

struct Context {
  json config;
  std::uint64_t seed = 0;
  fs::path out;
  int workers = 1;
  int precision = 64;
};

// --- config helpers --------------------------------------------------------

json parse_scalar(const std::string& s) {
  try {
    auto j = json::parse(s);
    if (j.is_primitive()) return j;
  } catch (const json::parse_error&) {
  }
  return s;
}

void set_key(json& cfg, const std::string& dotted, json value) {
  json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    const auto dot = dotted.find('.', start);
    const auto part = dotted.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

bool has(const json& cfg, const std::string& key) { return cfg.contains(key) && !cfg.at(key).is_null(); }

std::string require_string(const json& cfg, const std::string& key) {
  if (!has(cfg, key)) throw UsageError("missing required setting '" + key + "'");
  if (!cfg.at(key).is_string()) throw UsageError("setting '" + key + "' must be a string");
  return cfg.at(key).get<std::string>();
}

template <typename T>
T get_or(const json& cfg, const std::string& key, T fallback) {
  if (!has(cfg, key)) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("setting '" + key + "' has the wrong type");
  }
}

json section(const json& cfg, const std::string& key) { return has(cfg, key) ? cfg.at(key) : json::object(); }

void check_paths(const json& cfg) {
  for (const auto& key : kPathKeys) {
    if (!has(cfg, key)) continue;
    const auto p = require_string(cfg, key);
    if (!fs::exists(p)) throw UsageError("input '" + key + "' does not exist: " + p);
  }
  if (has(cfg, "tag_dicts")) {
    for (const auto& d : cfg.at("tag_dicts")) {
      const auto p = d.at("path").get<std::string>();
      if (!fs::exists(p)) throw UsageError("tag dictionary does not exist: " + p);
    }
  }
}

std::string out_file(const Context& ctx, const std::string& name) { return (ctx.out / name).string(); }

// --- loading ---------------------------------------------------------------

std::shared_ptr<const LexicalResources> load_resources(const json& cfg) {
  auto res = std::make_shared<LexicalResources>();
  if (has(cfg, "word_vectors")) res->word_vectors = load_word_vectors(require_string(cfg, "word_vectors"));
  if (has(cfg, "brown_clusters")) res->brown_paths = load_brown_clusters(require_string(cfg, "brown_clusters"));
  if (has(cfg, "tag_dicts")) {
    for (const auto& d : cfg.at("tag_dicts")) {
      res->tag_dicts.push_back(load_tag_dictionary(d.at("path").get<std::string>(), d.at("name").get<std::string>()));
    }
  }
  return res;
}

Corpus load_corpus_key(const json& cfg, const std::string& key) {
  return load_corpus(require_string(cfg, key), load_tagset(require_string(cfg, "tagset")));
}

/// Restricts a corpus to one side of the split named by "split"/"side".
Corpus apply_split(const Corpus& corpus, const json& cfg, const std::string& default_side) {
  if (!has(cfg, "split")) return corpus;
  const auto split = split_from_json(load_json(require_string(cfg, "split")));
  const auto side = get_or<std::string>(cfg, "side", default_side);
  if (side == "train") return corpus.subset(split.train_authors);
  if (side == "test") return corpus.subset(split.test_authors);
  throw UsageError("side must be 'train' or 'test'");
}

std::shared_ptr<const NodeEmbedding> load_embedding_key(const json& cfg) {
  return std::make_shared<const NodeEmbedding>(load_node_embedding(require_string(cfg, "embedding")));
}

template <typename F>
auto with_precision(int precision, F&& f) {
  if (precision == 32) return f(float{});
  return f(double{});
}

void write_per_author(const std::map<std::string, double>& acc, const std::string& path) {
  auto out = text::open_output(path);
  char buf[64];
  for (const auto& [a, v] : acc) {
    std::snprintf(buf, sizeof buf, "\t%.17g\n", v);
    out << a << buf;
  }
}

std::map<std::string, double> read_accuracies(const std::string& path) {
  auto in = text::open_input(path);
  std::map<std::string, double> acc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto f = text::split_ws(t);
    if (f.size() != 2) throw DataError(path, lineno, "expected 'author accuracy'");
    const auto v = text::parse_double(f[1]);
    if (!v) throw DataError(path, lineno, "bad accuracy '" + std::string(f[1]) + "'");
    acc[std::string(f[0])] = *v;
  }
  if (acc.empty()) throw DataError(path, 0, "no accuracies");
  return acc;
}

// Any trained tagger, loaded from a checkpoint.
struct LoadedModel {
  std::string kind;
  Tagset tagset;
  std::function<std::vector<int>(const Tweet&)> tag;
  std::function<std::vector<double>(const std::string&)> attention;  // social only
  std::function<bool(const std::string&)> embedded;

  std::vector<int> operator()(const Tweet& t) const { return tag(t); }
};

struct TaggerRef {
  const LoadedModel* m;
  std::vector<int> tag(const Tweet& t) const { return m->tag(t); }
};

LoadedModel load_model(const json& cfg) {
  const auto path = require_string(cfg, "model");
  const auto kind = checkpoint_kind(path);
  const auto ck = load_checkpoint(path, kind);
  const auto& train_cfg = ck.at("config");
  // Resources and embeddings default to the ones named at training time.
  json res_cfg = train_cfg;
  for (const auto& k : {"word_vectors", "brown_clusters", "tag_dicts", "embedding"}) {
    if (has(cfg, k)) res_cfg[k] = cfg.at(k);
  }
  LoadedModel lm;
  lm.kind = kind;
  if (kind == "naive") {
    auto m = std::make_shared<NaiveModel>(NaiveModel::from_json(ck.at("model")));
    lm.tag = [m](const Tweet& t) { return m->tag(t); };
    lm.tagset = m->tagset();
  } else if (kind == "crf") {
    auto m = std::make_shared<CrfModel>(CrfModel::from_json(ck.at("model")));
    lm.tag = [m](const Tweet& t) { return m->tag(t); };
    lm.tagset = m->tagset();
  } else if (kind == "bilstm" || kind == "social") {
    json res_paths = json::object();
    for (const auto& k : {"word_vectors", "brown_clusters", "tag_dicts", "embedding"}) {
      if (has(res_cfg, k)) res_paths[k] = res_cfg.at(k);
    }
    check_paths(res_paths);
    const int precision = ck.value("precision", 64);
    with_precision(precision, [&](auto tag) {
      using Real = decltype(tag);
      if (kind == "bilstm") {
        auto m = std::make_shared<BasisTagger<Real>>(BasisTagger<Real>::from_json(ck.at("model"), load_resources(res_cfg)));
        lm.tag = [m](const Tweet& t) { return m->tag(t); };
        lm.tagset = m->tagset();
      } else {
        auto m = std::make_shared<SocialAttentionModel<Real>>(
            SocialAttentionModel<Real>::from_json(ck.at("model"), load_resources(res_cfg), load_embedding_key(res_cfg)));
        lm.tag = [m](const Tweet& t) { return m->tag(t); };
        lm.attention = [m](const std::string& a) { return attention_weights(*m, a); };
        lm.embedded = [m](const std::string& a) { return m->embedded(a); };
        lm.tagset = m->tagset();
      }
      return 0;
    });
  } else {
    throw DataError(path, 0, "unknown model kind '" + kind + "'");
  }
  return lm;
}

/// Corpus scored by a model; the tagset defaults to the model's own.
Corpus model_corpus(const json& cfg, const LoadedModel& model) {
  const auto tagset = has(cfg, "tagset") ? load_tagset(require_string(cfg, "tagset")) : model.tagset;
  return apply_split(load_corpus(require_string(cfg, "corpus"), tagset), cfg, "test");
}

std::map<std::string, double> model_accuracies(const json& cfg) {
  const auto model = load_model(cfg);
  const auto corpus = model_corpus(cfg, model);
  return per_author_accuracy(TaggerRef{&model}, corpus);
}

// --- subcommands -----------------------------------------------------------

json run_preprocess(Context& ctx) {
  const auto& cfg = ctx.config;
  const auto corpus = load_corpus_key(cfg, "corpus");
  {
    auto out = text::open_output(out_file(ctx, "tokens.tsv"));
    out << "tweet_id\tauthor_id\tsurface\tnormalized\ttag\n";
    for (const auto& t : corpus.tweets) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        out << t.tweet_id << '\t' << t.author_id << '\t' << t.tokens[i].surface << '\t' << t.tokens[i].normalized
            << '\t' << (t.tags ? corpus.tagset.symbol((*t.tags)[i]) : "") << '\n';
      }
    }
  }
  std::set<std::string> vocab;
  for (const auto& t : corpus.tweets) {
    for (const auto& tok : t.tokens) vocab.insert(tok.normalized);
  }
  json m = {{"tweets", corpus.size()},
            {"tokens", corpus.num_tokens()},
            {"authors", corpus.authors().size()},
            {"labeled", corpus.labeled()},
            {"vocabulary", vocab.size()}};
  if (has(cfg, "edges")) {
    const auto g = load_edge_list(require_string(cfg, "edges"));
    save_edge_list(g, out_file(ctx, "edges.txt"));
    std::size_t in_graph = 0;
    for (const auto& a : corpus.authors()) in_graph += g.find(a) ? 1 : 0;
    m["nodes"] = g.num_nodes();
    m["edges"] = g.num_edges();
    m["authors_in_graph"] = in_graph;
  }
  return m;
}

json run_embed(Context& ctx) {
  const auto& cfg = ctx.config;
  const auto g = load_edge_list(require_string(cfg, "edges"));
  const auto line = line_config_from_json(section(cfg, "line"));
  Rng rng(ctx.seed);
  LineStats stats;
  const auto emb = train_line(g, line, rng, &stats);
  save_node_embedding(emb, out_file(ctx, "embedding.txt"));
  return {{"nodes", g.num_nodes()},
          {"edges", g.num_edges()},
          {"samples", stats.samples},
          {"first_decile_loss", stats.first_decile_loss},
          {"last_decile_loss", stats.last_decile_loss},
          {"embedding_hash", embedding_hash(emb)}};
}

json run_split(Context& ctx) {
  const auto& cfg = ctx.config;
  const auto corpus = load_corpus_key(cfg, "corpus");
  const auto method = get_or<std::string>(cfg, "method", "network");
  Rng rng(ctx.seed);
  SplitSpec split;
  if (method == "network") {
    split = network_split(*load_embedding_key(cfg), corpus, rng);
  } else if (method == "random") {
    if (!has(cfg, "train_size")) throw UsageError("random split needs 'train_size'");
    split = random_split(corpus, get_or<std::size_t>(cfg, "train_size", 0), rng);
  } else {
    throw UsageError("method must be 'network' or 'random'");
  }
  save_json(to_json(split), out_file(ctx, "split.json"));
  return {{"method", method}, {"train_authors", split.train_authors.size()}, {"test_authors", split.test_authors.size()}};
}

std::pair<Corpus, Corpus> train_valid(const Context& ctx) {
  const auto& cfg = ctx.config;
  auto train = apply_split(load_corpus_key(cfg, "train"), cfg, "train");
  if (has(cfg, "valid")) return {std::move(train), load_corpus_key(cfg, "valid")};
  return holdout_tweets(train, get_or(cfg, "valid_fraction", 0.1), Rng(ctx.seed).child("holdout"));
}

BasisConfig basis_config(const json& cfg) {
  auto j = section(cfg, "basis");
  if (has(cfg, "epochs")) j["epochs"] = cfg.at("epochs");
  return BasisConfig::from_json(j);
}

json log_json(const TrainLog& log) {
  return {{"epoch_loss", log.epoch_loss}, {"valid_accuracy", log.valid_accuracy}, {"best_epoch", log.best_epoch},
          {"best_valid_accuracy", log.valid_accuracy.at(static_cast<std::size_t>(log.best_epoch))}};
}

json run_train(Context& ctx, const std::string& kind) {
  const auto& cfg = ctx.config;
  const auto [train, valid] = train_valid(ctx);
  Rng rng(ctx.seed);
  json metrics = {{"model", kind}, {"train_tweets", train.size()}, {"valid_tweets", valid.size()}};
  json model;
  int precision = 64;
  if (kind == "naive") {
    const auto m = train_naive(train);
    model = m.to_json();
    if (!valid.empty()) metrics["valid_accuracy"] = evaluate(m, valid);
  } else if (kind == "crf") {
    auto ccfg = crf_config_from_json(section(cfg, "crf"));
    if (has(cfg, "epochs")) ccfg.epochs = get_or(cfg, "epochs", ccfg.epochs);
    CrfTrainLog log;
    const auto m = train_crf(train, valid.empty() ? nullptr : &valid, ccfg, rng, &log);
    model = m.to_json();
    metrics["epoch_nll"] = log.epoch_nll;
    metrics["valid_accuracy"] = log.valid_accuracy;
    metrics["best_epoch"] = log.best_epoch;
  } else if (kind == "bilstm" || kind == "social") {
    precision = ctx.precision;
    const auto res = load_resources(cfg);
    with_precision(precision, [&](auto tag) {
      using Real = decltype(tag);
      TrainLog log;
      if (kind == "bilstm") {
        const auto m = train_basis<Real>(train, valid, res, basis_config(cfg), rng, &log);
        model = m.to_json();
      } else {
        SocialConfig scfg;
        auto j = section(cfg, "social");
        j["basis"] = basis_config(cfg).to_json();
        if (!j.contains("K") && has(cfg, "network")) j["K"] = default_experts(require_string(cfg, "network"));
        if (has(cfg, "K")) j["K"] = cfg.at("K");
        if (has(cfg, "gate")) j["gate"] = cfg.at("gate");
        scfg = SocialConfig::from_json(j);
        const auto m = train_social<Real>(train, valid, load_embedding_key(cfg), res, scfg, rng, &log);
        model = m.to_json();
        const auto util = expert_utilization(m, train.authors());
        metrics["expert_mean_weight"] = util.mean_weight;
        metrics["expert_argmax_share"] = util.argmax_share;
      }
      metrics["training"] = log_json(log);
      return 0;
    });
  } else {
    throw UsageError("unknown model type '" + kind + "' (expected naive, crf, bilstm or social)");
  }
  save_json(make_checkpoint(kind, std::move(model), cfg, precision), out_file(ctx, "model.json"));
  return metrics;
}

json run_eval(Context& ctx) {
  const auto& cfg = ctx.config;
  const auto model = load_model(cfg);
  const auto corpus = model_corpus(cfg, model);
  if (corpus.empty()) throw DataError("evaluation corpus is empty after applying the split");
  const auto acc = per_author_accuracy(TaggerRef{&model}, corpus);
  write_per_author(acc, out_file(ctx, "per_author.tsv"));
  return {{"model", model.kind}, {"accuracy", evaluate(TaggerRef{&model}, corpus)}, {"tweets", corpus.size()},
          {"tokens", corpus.num_tokens()}, {"authors", acc.size()}};
}

json run_assort(Context& ctx) {
  const auto& cfg = ctx.config;
  const auto acc = has(cfg, "accuracies") ? read_accuracies(require_string(cfg, "accuracies")) : model_accuracies(cfg);
  const auto g = load_edge_list(require_string(cfg, "edges"));
  const int epochs = get_or(cfg, "epochs", 10);
  const int samples = get_or(cfg, "samples", 20);
  const GraphMetric metric = [&acc](const SocialGraph& gr) { return assortativity(acc, gr); };
  const auto cmp = rewired_baseline(metric, g, epochs, samples, Rng(ctx.seed), ctx.workers);
  json m = cmp.to_json();
  m["pairs"] = connected_annotated_pairs(g, [&] {
                 std::set<std::string> s;
                 for (const auto& [a, _] : acc) s.insert(a);
                 return s;
               }()).size();
  if (const int sweep = get_or(cfg, "sweep", 0); sweep > 0) {
    const auto pts = rewiring_sweep(metric, g, sweep, samples, Rng(ctx.seed).child("sweep"), ctx.workers);
    write_sweep_csv(pts, out_file(ctx, "sweep.csv"));
    if (get_or(cfg, "svg", true)) write_sweep_svg(pts, out_file(ctx, "sweep.svg"), "assortativity vs rewiring");
    m["sweep_epochs"] = sweep;
  }
  return m;
}

json run_attn_sim(Context& ctx) {
  const auto& cfg = ctx.config;
  const auto model = load_model(cfg);
  if (model.kind != "social") throw UsageError("attn-sim needs a social model, got '" + model.kind + "'");
  const auto g = load_edge_list(require_string(cfg, "edges"));
  std::set<std::string> authors;
  if (has(cfg, "corpus")) {
    for (const auto& a : model_corpus(cfg, model).authors()) authors.insert(a);
  } else {
    authors.insert(g.nodes().begin(), g.nodes().end());
  }
  std::map<std::string, std::vector<double>> pi;
  for (const auto& a : authors) {
    if (model.embedded(a)) pi.emplace(a, model.attention(a));
  }
  const auto cmp = rewired_baseline([&pi](const SocialGraph& gr) { return attention_similarity(pi, gr); }, g,
                                    get_or(cfg, "epochs", 10), get_or(cfg, "samples", 20), Rng(ctx.seed), ctx.workers);
  json m = cmp.to_json();
  m["embedded_authors"] = pi.size();
  return m;
}

SynthConfig synth_config(const json& cfg) { return SynthConfig::from_json(section(cfg, "synth")); }

json run_synth(Context& ctx) {
  const auto scfg = synth_config(ctx.config);
  const auto b = generate_benchmark(scfg, Rng(ctx.seed));
  save_corpus(b.corpus, out_file(ctx, "corpus.tsv"));
  save_edge_list(b.graph, out_file(ctx, "edges.txt"));
  save_tagset(b.corpus.tagset, out_file(ctx, "tagset.txt"));
  {
    auto out = text::open_output(out_file(ctx, "communities.tsv"));
    for (const auto& [a, c] : b.communities) out << a << '\t' << c << '\n';
  }
  return {{"authors", b.communities.size()},
          {"edges", b.graph.num_edges()},
          {"tweets", b.corpus.size()},
          {"tokens", b.corpus.num_tokens()}};
}

json run_synth_e2e(Context& ctx) {
  const auto& cfg = ctx.config;
  const auto b = generate_benchmark(synth_config(cfg), Rng(ctx.seed).child("benchmark"));
  const Rng rng(ctx.seed);
  const int epochs = get_or(cfg, "epochs", 10);
  const int samples = get_or(cfg, "samples", 20);
  const auto line = line_config_from_json(section(cfg, "line"));

  json m;
  const auto assort = assortativity_experiment(b, epochs, samples, rng.child("assortativity"), 0, ctx.workers);
  m["assortativity"] = assort.comparison.to_json();

  auto crf = crf_config_from_json(section(cfg, "crf"));
  const auto gap = split_gap_experiment(b, get_or(cfg, "splits", 10), line, crf, rng.child("split-gap"));
  m["split_gap"] = gap.to_json();

  if (get_or(cfg, "social", true)) {
    auto j = section(cfg, "social_model");
    if (!j.contains("basis")) j["basis"] = toy_basis_config().to_json();
    if (!j.contains("K")) j["K"] = 2;
    const auto scfg = SocialConfig::from_json(j);
    const auto attn = with_precision(ctx.precision, [&](auto tag) {
      return attention_experiment<decltype(tag)>(b, scfg, line, epochs, samples, rng.child("attention"), ctx.workers);
    });
    m["attention"] = attn.comparison.to_json();
    m["attention"]["valid_accuracy"] = attn.valid_accuracy;
    m["attention"]["expert_mean_weight"] = attn.utilization.mean_weight;
  }
  save_json(m, out_file(ctx, "metrics.json"));
  return m;
}

// --- wiring ----------------------------------------------------------------

struct Command {
  CLI::App* app = nullptr;
  struct Override {
    std::string key;
    CLI::Option* option;
    std::string* value;
  };
  std::map<std::string, std::string> values;  // by flag name
  std::vector<Override> overrides;
  std::function<json(Context&)> run;
};

void flag(Command& c, const std::string& name, const std::string& key, const std::string& help) {
  auto& value = c.values[name];
  c.overrides.push_back({key, c.app->add_option(name, value, help), &value});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Part-of-speech tagging with social-network attention: training, evaluation and homophily analysis"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "sociotag-out";
  std::uint64_t seed = 0;
  int workers = 1, precision = 64;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (recorded in every report)");
  auto* workers_opt = app.add_option("--workers", workers, "Worker threads for rewired samples")->check(CLI::PositiveNumber);
  auto* precision_opt =
      app.add_option("--precision", precision, "Floating-point width of the neural models")->check(CLI::IsMember({32, 64}));
  app.add_option("--config", config_path, "JSON config; flags override its keys");
  app.add_option("--out", out_dir, "Output directory");

  std::vector<std::unique_ptr<Command>> commands;
  const auto add = [&](const std::string& name, const std::string& help, std::function<json(Context&)> run) {
    auto c = std::make_unique<Command>();
    c->app = app.add_subcommand(name, help);
    c->run = std::move(run);
    commands.push_back(std::move(c));
    return commands.back().get();
  };
  const auto resource_flags = [](Command& c) {
    flag(c, "--word-vectors", "word_vectors", "Pretrained word vectors (word2vec text format)");
    flag(c, "--brown", "brown_clusters", "Brown clusters (path word count)");
  };
  std::vector<std::string> tag_dicts;
  const auto add_tag_dict_flag = [&](Command& c) {
    c.app->add_option("--tag-dict", tag_dicts, "Tag dictionary as name=path (repeatable)");
  };

  auto* pre = add("preprocess", "Validate and normalize a corpus (and optionally an edge list)", run_preprocess);
  flag(*pre, "--corpus", "corpus", "Corpus file");
  flag(*pre, "--tagset", "tagset", "Tagset file");
  flag(*pre, "--edges", "edges", "Edge list");

  auto* embed = add("embed", "Learn LINE node embeddings from an edge list", run_embed);
  flag(*embed, "--edges", "edges", "Edge list");
  flag(*embed, "--dim", "line.dim", "Embedding dimension");
  flag(*embed, "--order", "line.order", "Proximity order (1 or 2)");
  flag(*embed, "--negatives", "line.negatives", "Negative samples per edge");
  flag(*embed, "--samples", "line.total_samples", "Total edge samples (0 = automatic)");
  flag(*embed, "--lr", "line.initial_lr", "Initial learning rate");

  auto* split = add("split", "Split annotated authors into train/test sides", run_split);
  flag(*split, "--method", "method", "network or random");
  flag(*split, "--corpus", "corpus", "Corpus file");
  flag(*split, "--tagset", "tagset", "Tagset file");
  flag(*split, "--embedding", "embedding", "Node embedding (network method)");
  flag(*split, "--train-size", "train_size", "Number of training authors (random method)");

  std::string model_type;
  auto* train = add("train", "Train a tagger", [&](Context& ctx) { return run_train(ctx, model_type); });
  train->app->add_option("type", model_type, "naive, crf, bilstm or social")->required();
  flag(*train, "--train", "train", "Training corpus");
  flag(*train, "--valid", "valid", "Validation corpus (default: hold out tweets from training)");
  flag(*train, "--tagset", "tagset", "Tagset file");
  flag(*train, "--split", "split", "Split file; training uses its train side");
  flag(*train, "--embedding", "embedding", "Node embedding (social)");
  flag(*train, "--network", "network", "Network type for the default K (follow, mention, retweet)");
  flag(*train, "--K", "K", "Number of experts (social)");
  flag(*train, "--gate", "gate", "softmax or sigmoid (social)");
  flag(*train, "--epochs", "epochs", "Maximum epochs");
  resource_flags(*train);
  add_tag_dict_flag(*train);

  auto* eval = add("eval", "Token accuracy of a trained model", run_eval);
  flag(*eval, "--model", "model", "Model checkpoint");
  flag(*eval, "--corpus", "corpus", "Evaluation corpus");
  flag(*eval, "--tagset", "tagset", "Tagset file (default: the model's)");
  flag(*eval, "--split", "split", "Split file");
  flag(*eval, "--side", "side", "Split side to evaluate (default test)");
  flag(*eval, "--embedding", "embedding", "Node embedding (social)");
  resource_flags(*eval);
  add_tag_dict_flag(*eval);

  auto* assort = add("assort", "Accuracy assortativity against rewired networks", run_assort);
  flag(*assort, "--accuracies", "accuracies", "Per-author accuracies (author accuracy per line)");
  flag(*assort, "--model", "model", "Model checkpoint (instead of --accuracies)");
  flag(*assort, "--corpus", "corpus", "Corpus scored by --model");
  flag(*assort, "--tagset", "tagset", "Tagset file (default: the model's)");
  flag(*assort, "--split", "split", "Split file");
  flag(*assort, "--side", "side", "Split side to score");
  flag(*assort, "--edges", "edges", "Edge list");
  flag(*assort, "--epochs", "epochs", "Rewiring epochs per sample");
  flag(*assort, "--samples", "samples", "Rewired samples");
  flag(*assort, "--sweep", "sweep", "Also sweep 1..N cumulative epochs (CSV + SVG)");
  flag(*assort, "--svg", "svg", "Write the sweep chart (true/false)");

  auto* attn = add("attn-sim", "Attention similarity of connected authors against rewired networks", run_attn_sim);
  flag(*attn, "--model", "model", "Social model checkpoint");
  flag(*attn, "--embedding", "embedding", "Node embedding");
  flag(*attn, "--edges", "edges", "Edge list");
  flag(*attn, "--corpus", "corpus", "Restrict to this corpus's authors");
  flag(*attn, "--tagset", "tagset", "Tagset file (default: the model's)");
  flag(*attn, "--epochs", "epochs", "Rewiring epochs per sample");
  flag(*attn, "--samples", "samples", "Rewired samples");

  const auto synth_flags = [](Command& c) {
    flag(c, "--authors", "synth.authors", "Number of authors");
    flag(c, "--communities", "synth.communities", "Number of communities");
    flag(c, "--p-in", "synth.p_in", "Intra-community edge probability");
    flag(c, "--p-out", "synth.p_out", "Inter-community edge probability");
    flag(c, "--divergence", "synth.divergence", "Probability of the community tag convention");
    flag(c, "--tweets-per-author", "synth.tweets_per_author", "Tweets per author");
  };
  auto* synth = add("synth", "Generate a planted-community benchmark", run_synth);
  synth_flags(*synth);
  auto* e2e = add("synth-e2e", "Full synthetic pipeline: assortativity, split gap, attention similarity", run_synth_e2e);
  synth_flags(*e2e);
  flag(*e2e, "--splits", "splits", "Network/random split pairs");
  flag(*e2e, "--epochs", "epochs", "Rewiring epochs per sample");
  flag(*e2e, "--samples", "samples", "Rewired samples");
  flag(*e2e, "--social", "social", "Run the attention experiment (true/false)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    Command* cmd = nullptr;
    for (auto& c : commands) {
      if (c->app->parsed()) cmd = c.get();
    }
    Context ctx;
    if (!config_path.empty() && !fs::exists(config_path)) throw UsageError("config does not exist: " + config_path);
    ctx.config = config_path.empty() ? json::object() : load_json(config_path);
    if (!ctx.config.is_object()) throw UsageError("config must be a JSON object");
    for (const auto& o : cmd->overrides) {
      if (o.option->count() > 0) set_key(ctx.config, o.key, parse_scalar(*o.value));
    }
    if (!tag_dicts.empty()) {
      json list = json::array();
      for (const auto& spec : tag_dicts) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--tag-dict expects name=path, got '" + spec + "'");
        list.push_back({{"name", spec.substr(0, eq)}, {"path", spec.substr(eq + 1)}});
      }
      ctx.config["tag_dicts"] = list;
    }
    if (seed_opt->count() > 0) ctx.config["seed"] = seed;
    if (workers_opt->count() > 0) ctx.config["workers"] = workers;
    if (precision_opt->count() > 0) ctx.config["precision"] = precision;
    ctx.seed = get_or<std::uint64_t>(ctx.config, "seed", 0);
    ctx.config["seed"] = ctx.seed;
    ctx.workers = get_or(ctx.config, "workers", 1);
    ctx.precision = get_or(ctx.config, "precision", 64);
    if (ctx.precision != 32 && ctx.precision != 64) throw UsageError("precision must be 32 or 64");
    if (ctx.workers < 1) throw UsageError("workers must be >= 1");
    check_paths(ctx.config);

    ctx.out = out_dir;
    fs::create_directories(ctx.out);
    const auto metrics = cmd->run(ctx);
    std::string experiment = cmd->app->get_name();
    if (experiment == "train") experiment += " " + model_type;
    save_json(make_report(experiment, ctx.config, ctx.seed, metrics), out_file(ctx, "report.json"));
    std::cout << metrics.dump(2) << '\n';
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
