#pragma once

// Word-level text handling: tokenizer, vocabulary, lemmatizer and the small
// lexicon tables (stop words, noun/verb list) used by grounding.

#include <algorithm>
#include <cctype>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "grf/error.hpp"
#include "grf/io.hpp"

namespace grf {

using TokenId = std::size_t;

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Lowercases and splits on whitespace; sentence punctuation becomes its own token.
inline std::vector<std::string> tokenize(std::string_view text) {
  static constexpr std::string_view kPunct = ".,!?;:\"()[]{}";
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      flush();
    } else if (kPunct.find(ch) != std::string_view::npos) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  flush();
  return out;
}

inline std::string join(const std::vector<std::string>& words, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

/// Token vocabulary. Ids 0-3 are reserved for [bos], [eos], [pad], [unk].
class Vocab {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kPad = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr std::size_t kNumSpecials = 4;

  Vocab() {
    for (const char* s : {"[bos]", "[eos]", "[pad]", "[unk]"}) add(s);
  }

  explicit Vocab(const std::vector<std::string>& tokens) : Vocab() {
    for (const auto& t : tokens) add(t);
  }

  /// Adds a token if absent; returns its id either way.
  TokenId add(const std::string& token) {
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    if (token.empty() || token.find_first_of(" \t\n\r") != std::string::npos)
      throw Error(ErrorCode::Format, "vocab: token must be non-empty without whitespace: '" + token + "'");
    tokens_.push_back(token);
    index_.emplace(token, tokens_.size() - 1);
    return tokens_.size() - 1;
  }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

  TokenId id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token(TokenId id) const {
    if (id >= tokens_.size()) throw Error(ErrorCode::InvalidId, "vocab: token id " + std::to_string(id) + " out of range");
    return tokens_[id];
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(const std::vector<std::string>& words) const {
    std::vector<TokenId> ids;
    ids.reserve(words.size());
    for (const auto& w : words) ids.push_back(id(w));
    return ids;
  }

  /// Space-joined surface text; specials other than [unk] are dropped.
  std::string decode(const std::vector<TokenId>& ids) const {
    std::vector<std::string> words;
    for (TokenId i : ids)
      if (i >= kNumSpecials || i == kUnk) words.push_back(token(i));
    return join(words);
  }

  /// File format: one token per line; line k (0-based) gets id k + 4.
  static Vocab load(const std::string& path) {
    Vocab v;
    for (const auto& line : io::read_lines(path)) {
      if (line.empty()) continue;
      v.add(line);
    }
    return v;
  }

  std::string serialize() const {
    std::string out;
    for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) out += tokens_[i] + "\n";
    return out;
  }

  void save(const std::string& path) const { io::write_file(path, serialize()); }

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Table-driven lemmatizer with a suffix-stripping fallback.
///
/// Lookup order: dictionary entry, then the word itself if `known` accepts it,
/// then suffix candidates (-ies, -es, -s, -ed, -ing and their e/doubled-consonant
/// variants) in a fixed order, keeping the first one `known` accepts. With no
/// `known` predicate only the dictionary applies.
class Lemmatizer {
 public:
  using Known = std::function<bool(std::string_view)>;

  void add(const std::string& form, const std::string& lemma) { table_[to_lower(form)] = to_lower(lemma); }

  /// TSV: form<TAB>lemma. Blank lines and '#' comments are ignored.
  static Lemmatizer load(const std::string& path) {
    Lemmatizer l;
    for (const auto& line : io::read_lines(path)) {
      if (line.empty() || line[0] == '#') continue;
      auto f = io::split(line, '\t');
      if (f.size() < 2) throw Error(ErrorCode::Format, "lemma table '" + path + "': expected form<TAB>lemma: " + line);
      l.add(f[0], f[1]);
    }
    return l;
  }

  std::string lemmatize(std::string_view word, const Known& known = {}) const {
    std::string w = to_lower(word);
    if (auto it = table_.find(w); it != table_.end()) return it->second;
    if (!known || known(w)) return w;
    for (const auto& c : candidates(w))
      if (known(c)) return c;
    return w;
  }

  std::size_t size() const { return table_.size(); }

 private:
  static bool ends_with(const std::string& w, std::string_view suf) {
    return w.size() > suf.size() + 1 && w.compare(w.size() - suf.size(), suf.size(), suf) == 0;
  }

  static std::vector<std::string> candidates(const std::string& w) {
    std::vector<std::string> out;
    auto stem = [&](std::size_t n) { return w.substr(0, w.size() - n); };
    auto undouble = [](const std::string& s) {
      if (s.size() >= 2 && s[s.size() - 1] == s[s.size() - 2]) return s.substr(0, s.size() - 1);
      return std::string{};
    };
    if (ends_with(w, "ies")) out.push_back(stem(3) + "y");
    if (ends_with(w, "es")) out.push_back(stem(2));
    if (ends_with(w, "s") && !ends_with(w, "ss")) out.push_back(stem(1));
    if (ends_with(w, "ied")) out.push_back(stem(3) + "y");
    if (ends_with(w, "ed")) {
      out.push_back(stem(2));
      out.push_back(stem(1));
      if (auto u = undouble(stem(2)); !u.empty()) out.push_back(u);
    }
    if (ends_with(w, "ing")) {
      out.push_back(stem(3));
      out.push_back(stem(3) + "e");
      if (auto u = undouble(stem(3)); !u.empty()) out.push_back(u);
    }
    return out;
  }

  std::unordered_map<std::string, std::string> table_;
};

/// Plain word set loaded from a one-word-per-line file ('#' comments allowed).
class WordSet {
 public:
  WordSet() = default;
  explicit WordSet(std::initializer_list<std::string> words) {
    for (const auto& w : words) words_.insert(to_lower(w));
  }

  static WordSet load(const std::string& path) {
    WordSet s;
    for (const auto& line : io::read_lines(path)) {
      if (line.empty() || line[0] == '#') continue;
      s.words_.insert(to_lower(io::split(line, '\t')[0]));
    }
    return s;
  }

  /// Noun/verb lexicon: `lemma[<TAB>tag]` lines; untagged lines and NOUN/VERB tags are kept.
  static WordSet load_pos(const std::string& path) {
    WordSet s;
    for (const auto& line : io::read_lines(path)) {
      if (line.empty() || line[0] == '#') continue;
      auto f = io::split(line, '\t');
      if (f.size() >= 2) {
        const std::string tag = to_lower(f[1]);
        if (tag != "noun" && tag != "verb" && tag != "n" && tag != "v") continue;
      }
      s.words_.insert(to_lower(f[0]));
    }
    return s;
  }

  void insert(const std::string& w) { words_.insert(to_lower(w)); }
  bool contains(std::string_view w) const { return words_.count(std::string(w)) > 0; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

 private:
  std::unordered_set<std::string> words_;
};

}  // namespace grf
