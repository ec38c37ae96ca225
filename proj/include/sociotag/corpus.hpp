#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sociotag/error.hpp"
#include "sociotag/text.hpp"

namespace sociotag {

inline constexpr std::string_view kMentionToken = "<@MENTION>";
inline constexpr std::string_view kUrlToken = "<URL>";

namespace detail {

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

}  // namespace detail

/// `@` followed by one or more letters, digits or underscores.
inline bool is_mention(std::string_view s) {
  if (s.size() < 2 || s[0] != '@') return false;
  return std::all_of(s.begin() + 1, s.end(), detail::is_word_char);
}

inline bool is_url(std::string_view s) {
  return detail::starts_with_ci(s, "http://") || detail::starts_with_ci(s, "https://") ||
         detail::starts_with_ci(s, "www.");
}

/// local@domain.tld, where the tld is at least two letters.
inline bool is_email(std::string_view s) {
  const auto at = s.find('@');
  if (at == std::string_view::npos || at == 0 || s.find('@', at + 1) != std::string_view::npos) {
    return false;
  }
  const auto local = s.substr(0, at);
  const auto domain = s.substr(at + 1);
  const auto local_ok = [](char c) {
    return detail::is_word_char(c) || c == '.' || c == '%' || c == '+' || c == '-';
  };
  if (!std::all_of(local.begin(), local.end(), local_ok)) return false;
  const auto dot = domain.rfind('.');
  if (dot == std::string_view::npos || dot == 0) return false;
  const auto host = domain.substr(0, dot);
  const auto tld = domain.substr(dot + 1);
  if (tld.size() < 2) return false;
  if (!std::all_of(tld.begin(), tld.end(),
                   [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; })) {
    return false;
  }
  return std::all_of(host.begin(), host.end(), [](char c) {
    return detail::is_word_char(c) || c == '.' || c == '-';
  });
}

/// Lowercases (ASCII) and collapses @-mentions, URLs and email addresses
/// into placeholder tokens. Idempotent: the placeholders map to themselves.
inline std::string normalize_token(std::string_view surface) {
  if (surface == kMentionToken || surface == kUrlToken) return std::string(surface);
  if (is_mention(surface)) return std::string(kMentionToken);
  if (is_url(surface) || is_email(surface)) return std::string(kUrlToken);
  std::string out(surface);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

class Tagset {
 public:
  Tagset() = default;

  explicit Tagset(std::vector<std::string> tags) : tags_(std::move(tags)) {
    if (tags_.empty()) throw DataError("tagset is empty");
    for (std::size_t i = 0; i < tags_.size(); ++i) {
      if (tags_[i].empty()) throw DataError("tagset contains an empty symbol");
      if (!index_.emplace(tags_[i], static_cast<int>(i)).second) {
        throw DataError("duplicate tag symbol '" + tags_[i] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return tags_.size(); }
  bool empty() const noexcept { return tags_.empty(); }
  const std::vector<std::string>& symbols() const noexcept { return tags_; }
  const std::string& symbol(int id) const { return tags_.at(static_cast<std::size_t>(id)); }

  std::optional<int> find(std::string_view tag) const {
    auto it = index_.find(std::string(tag));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  int index(std::string_view tag) const {
    auto id = find(tag);
    if (!id) throw DataError("unknown tag '" + std::string(tag) + "'");
    return *id;
  }

  bool operator==(const Tagset& other) const { return tags_ == other.tags_; }

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> index_;
};

inline Tagset load_tagset(const std::string& path) {
  auto in = text::open_input(path);
  std::vector<std::string> tags;
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = text::trim(line);
    if (t.empty()) continue;
    if (!seen.insert(std::string(t)).second) {
      throw DataError(path, lineno, "duplicate tag '" + std::string(t) + "'");
    }
    tags.emplace_back(t);
  }
  if (tags.empty()) throw DataError(path, lineno, "tagset file has no tags");
  return Tagset(std::move(tags));
}

inline void save_tagset(const Tagset& tagset, const std::string& path) {
  auto out = text::open_output(path);
  for (const auto& t : tagset.symbols()) out << t << '\n';
}

struct Token {
  std::string surface;
  std::string normalized;

  Token() = default;
  explicit Token(std::string s) : surface(std::move(s)), normalized(normalize_token(surface)) {}

  bool operator==(const Token&) const = default;
};

struct Tweet {
  std::string tweet_id;
  std::string author_id;
  std::vector<Token> tokens;
  // Gold tag ids into the corpus tagset; empty optional for unlabeled tweets.
  std::optional<std::vector<int>> tags;

  std::size_t size() const noexcept { return tokens.size(); }
  bool labeled() const noexcept { return tags.has_value(); }

  bool operator==(const Tweet&) const = default;
};

struct Corpus {
  std::vector<Tweet> tweets;
  Tagset tagset;

  std::size_t size() const noexcept { return tweets.size(); }
  bool empty() const noexcept { return tweets.empty(); }

  std::size_t num_tokens() const {
    std::size_t n = 0;
    for (const auto& t : tweets) n += t.size();
    return n;
  }

  bool labeled() const {
    return std::all_of(tweets.begin(), tweets.end(), [](const Tweet& t) { return t.labeled(); });
  }

  /// Distinct author ids, sorted.
  std::vector<std::string> authors() const {
    std::set<std::string> s;
    for (const auto& t : tweets) s.insert(t.author_id);
    return {s.begin(), s.end()};
  }

  template <typename AuthorSet>
  Corpus subset(const AuthorSet& keep) const {
    Corpus out;
    out.tagset = tagset;
    for (const auto& t : tweets) {
      if (keep.count(t.author_id) > 0) out.tweets.push_back(t);
    }
    return out;
  }

  bool operator==(const Corpus& other) const {
    return tweets == other.tweets && tagset == other.tagset;
  }
};

/// Reads the block format: `# tweet_id = ...`, `# author_id = ...`, then one
/// `token<TAB>tag` (or bare `token`) line per token; blocks are separated by
/// blank lines.
inline Corpus read_corpus(std::istream& in, const Tagset& tagset, const std::string& name) {
  static constexpr std::string_view kTweetHeader = "# tweet_id = ";
  static constexpr std::string_view kAuthorHeader = "# author_id = ";

  Corpus corpus;
  corpus.tagset = tagset;

  Tweet cur;
  bool in_block = false;
  bool have_author = false;
  std::size_t block_start = 0;
  std::size_t tagged = 0;
  std::size_t untagged = 0;

  const auto finish = [&](std::size_t lineno) {
    if (!in_block) return;
    if (!have_author || cur.author_id.empty()) {
      throw DataError(name, block_start, "block has no author_id header");
    }
    if (cur.tokens.empty()) throw DataError(name, block_start, "block has no tokens");
    if (tagged > 0 && untagged > 0) {
      throw DataError(name, lineno, "tag count does not match token count in block");
    }
    if (untagged > 0) cur.tags.reset();
    corpus.tweets.push_back(std::move(cur));
    cur = Tweet{};
    in_block = false;
    have_author = false;
    tagged = untagged = 0;
  };

  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (text::trim(line).empty()) {
      finish(lineno);
      continue;
    }
    if (!in_block) {
      in_block = true;
      block_start = lineno;
      cur.tags.emplace();
    }
    if (line.substr(0, kTweetHeader.size()) == kTweetHeader) {
      if (!cur.tokens.empty()) throw DataError(name, lineno, "header after tokens");
      cur.tweet_id = std::string(text::trim(line.substr(kTweetHeader.size())));
      continue;
    }
    if (line.substr(0, kAuthorHeader.size()) == kAuthorHeader) {
      if (!cur.tokens.empty()) throw DataError(name, lineno, "header after tokens");
      cur.author_id = std::string(text::trim(line.substr(kAuthorHeader.size())));
      have_author = true;
      continue;
    }
    if (!have_author) throw DataError(name, lineno, "missing '# author_id = ' header");
    const auto fields = text::split(line, '\t');
    if (fields.size() > 2 || fields[0].empty()) {
      throw DataError(name, lineno, "expected 'token<TAB>tag' or 'token'");
    }
    cur.tokens.emplace_back(std::string(fields[0]));
    if (fields.size() == 2) {
      const auto tag = tagset.find(text::trim(fields[1]));
      if (!tag) throw DataError(name, lineno, "unknown tag '" + std::string(fields[1]) + "'");
      cur.tags->push_back(*tag);
      ++tagged;
    } else {
      ++untagged;
    }
  }
  finish(lineno);
  return corpus;
}

inline Corpus load_corpus(const std::string& path, const Tagset& tagset) {
  auto in = text::open_input(path);
  return read_corpus(in, tagset, path);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  bool first = true;
  for (const auto& t : corpus.tweets) {
    if (!first) out << '\n';
    first = false;
    out << "# tweet_id = " << t.tweet_id << '\n';
    out << "# author_id = " << t.author_id << '\n';
    for (std::size_t i = 0; i < t.tokens.size(); ++i) {
      out << t.tokens[i].surface;
      if (t.tags) out << '\t' << corpus.tagset.symbol((*t.tags)[i]);
      out << '\n';
    }
  }
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  auto out = text::open_output(path);
  write_corpus(out, corpus);
}

struct WordVectors {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  std::size_t size() const noexcept { return vectors.size(); }

  const std::vector<double>* find(const std::string& word) const {
    auto it = vectors.find(word);
    return it == vectors.end() ? nullptr : &it->second;
  }
};

/// Whitespace-separated `word v1 ... vD` rows with an optional `N D` header.
/// The first occurrence of a duplicated word wins.
inline WordVectors load_word_vectors(const std::string& path) {
  auto in = text::open_input(path);
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!text::trim(line).empty()) lines.emplace_back(lineno, line);
  }

  WordVectors wv;
  std::size_t start = 0;
  if (!lines.empty()) {
    const auto f = text::split_ws(lines[0].second);
    if (f.size() == 2) {
      const auto n = text::parse_int(f[0]);
      const auto d = text::parse_int(f[1]);
      const bool next_matches =
          lines.size() == 1 ||
          (d && text::split_ws(lines[1].second).size() == static_cast<std::size_t>(*d) + 1);
      if (n && d && *n >= 0 && *d > 0 && next_matches) {
        wv.dim = static_cast<std::size_t>(*d);
        start = 1;
      }
    }
  }

  for (std::size_t i = start; i < lines.size(); ++i) {
    const auto& [no, text_line] = lines[i];
    const auto f = text::split_ws(text_line);
    if (f.size() < 2) throw DataError(path, no, "row has no vector components");
    const std::size_t d = f.size() - 1;
    if (wv.dim == 0) wv.dim = d;
    if (d != wv.dim) {
      throw DataError(path, no,
                      "ragged row: expected " + std::to_string(wv.dim) + " components, got " +
                          std::to_string(d));
    }
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) {
      const auto x = text::parse_double(f[k + 1]);
      if (!x) throw DataError(path, no, "non-numeric component '" + std::string(f[k + 1]) + "'");
      v[k] = *x;
    }
    wv.vectors.try_emplace(std::string(f[0]), std::move(v));
  }
  return wv;
}

/// Writes `N D` then one row per word, sorted by word, at round-trip precision.
inline void save_word_vectors(const WordVectors& wv, const std::string& path) {
  auto out = text::open_output(path);
  std::vector<const std::string*> words;
  for (const auto& [w, _] : wv.vectors) words.push_back(&w);
  std::sort(words.begin(), words.end(), [](auto* a, auto* b) { return *a < *b; });
  out << wv.vectors.size() << ' ' << wv.dim << '\n';
  out.precision(17);
  for (const auto* w : words) {
    out << *w;
    for (double x : wv.vectors.at(*w)) out << ' ' << x;
    out << '\n';
  }
}

inline constexpr std::size_t kMaxBrownPath = 16;

/// `bitstring<TAB>word<TAB>count` lines; a duplicated word keeps the path of
/// its highest-count line.
inline std::unordered_map<std::string, std::string> load_brown_clusters(const std::string& path) {
  auto in = text::open_input(path);
  std::unordered_map<std::string, std::pair<std::string, long long>> best;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_ws(line);
    if (f.size() != 3) throw DataError(path, lineno, "expected 'bitstring word count'");
    const auto bits = f[0];
    if (bits.empty() || bits.size() > kMaxBrownPath ||
        !std::all_of(bits.begin(), bits.end(), [](char c) { return c == '0' || c == '1'; })) {
      throw DataError(path, lineno, "invalid cluster bitstring '" + std::string(bits) + "'");
    }
    const auto count = text::parse_int(f[2]);
    if (!count) throw DataError(path, lineno, "non-integer count '" + std::string(f[2]) + "'");
    auto [it, inserted] = best.try_emplace(std::string(f[1]), std::string(bits), *count);
    if (!inserted && *count > it->second.second) it->second = {std::string(bits), *count};
  }
  std::unordered_map<std::string, std::string> out;
  out.reserve(best.size());
  for (auto& [w, p] : best) out.emplace(w, std::move(p.first));
  return out;
}

struct TagCount {
  std::string tag;
  long long count = 0;
  bool operator==(const TagCount&) const = default;
};

struct TagDictionary {
  std::string name;
  std::unordered_map<std::string, std::vector<TagCount>> entries;

  const std::vector<TagCount>* find(const std::string& word) const {
    auto it = entries.find(word);
    return it == entries.end() ? nullptr : &it->second;
  }
};

/// `word<TAB>tag<TAB>count` lines, aggregated per (word, tag) and sorted by
/// count descending, ties by tag.
inline TagDictionary load_tag_dictionary(const std::string& path, const std::string& name) {
  auto in = text::open_input(path);
  std::map<std::string, std::map<std::string, long long>> agg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto f = text::split_ws(line);
    if (f.size() != 3) throw DataError(path, lineno, "expected 'word tag count'");
    const auto count = text::parse_int(f[2]);
    if (!count) throw DataError(path, lineno, "non-integer count '" + std::string(f[2]) + "'");
    agg[std::string(f[0])][std::string(f[1])] += *count;
  }
  TagDictionary dict;
  dict.name = name;
  for (auto& [word, tags] : agg) {
    std::vector<TagCount> list;
    for (auto& [tag, c] : tags) list.push_back({tag, c});
    std::stable_sort(list.begin(), list.end(),
                     [](const TagCount& a, const TagCount& b) { return a.count > b.count; });
    dict.entries.emplace(word, std::move(list));
  }
  return dict;
}

struct LexicalResources {
  WordVectors word_vectors;
  std::unordered_map<std::string, std::string> brown_paths;
  std::vector<TagDictionary> tag_dicts;

  const std::string* brown(const std::string& word) const {
    auto it = brown_paths.find(word);
    return it == brown_paths.end() ? nullptr : &it->second;
  }
};

}  // namespace sociotag
