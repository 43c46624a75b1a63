#pragma once

// Dataset loading and example preparation: grounding, extraction and labels.

#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "grf/grounding.hpp"
#include "grf/io.hpp"
#include "grf/model.hpp"

namespace grf {

struct TextPair {
  std::string src, tgt;
};

/// JSON lines: {"src": "...", "tgt": "..."}; blank lines are skipped.
inline std::vector<TextPair> parse_pairs(std::string_view text, const std::string& origin = "dataset") {
  std::vector<TextPair> out;
  std::size_t line_no = 0, start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("src").get<std::string>(), j.at("tgt").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Format, origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<TextPair> load_pairs(const std::string& path) { return parse_pairs(io::read_file(path), path); }

inline std::string pairs_to_jsonl(const std::vector<TextPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) out += nlohmann::json{{"src", p.src}, {"tgt", p.tgt}}.dump() + "\n";
  return out;
}

/// Maps text to concepts and subgraphs against one knowledge graph.
class Grounder {
 public:
  Grounder(const KnowledgeGraph& kg, Lexicons lex, ExtractionConfig cfg) : kg_(&kg), lex_(std::move(lex)), cfg_(cfg) {
    cfg_.validate();
  }

  const KnowledgeGraph& kg() const { return *kg_; }
  const ExtractionConfig& config() const { return cfg_; }

  /// Distinct source concepts in order of first mention.
  std::vector<ConceptId> sources(const std::vector<std::string>& words) const {
    std::vector<ConceptId> out;
    for (const auto& m : match_concepts(words, *kg_, lex_, cfg_.pos_filter))
      if (std::find(out.begin(), out.end(), m.concept_id) == out.end()) out.push_back(m.concept_id);
    return out;
  }

  /// Empty subgraph when nothing grounds.
  SubGraph ground(const std::vector<std::string>& words) const {
    auto src = sources(words);
    if (src.empty()) return {};
    return extract_subgraph(*kg_, src, cfg_);
  }

  /// Concept of a target word, if its lemma is in the KG.
  std::optional<ConceptId> concept_of(const std::string& word) const {
    auto known = [this](std::string_view w) { return kg_->contains(w); };
    return kg_->find(lex_.lemmatizer.lemmatize(word, known));
  }

 private:
  const KnowledgeGraph* kg_;
  Lexicons lex_;
  ExtractionConfig cfg_;
};

/// Word vocabulary over all source/target tokens plus every grounded node surface,
/// in order of first appearance.
inline Vocab build_vocab(const std::vector<TextPair>& pairs, const Grounder& grounder) {
  Vocab v;
  for (const auto& p : pairs) {
    auto src = tokenize(p.src);
    for (const auto& w : src) v.add(w);
    for (const auto& w : tokenize(p.tgt)) v.add(w);
    for (const auto& n : grounder.ground(src).nodes) v.add(grounder.kg().surface(n.concept_id));
  }
  return v;
}

inline std::vector<TokenId> node_tokens(const SubGraph& g, const KnowledgeGraph& kg, const Vocab& vocab) {
  std::vector<TokenId> out;
  for (const auto& n : g.nodes) out.push_back(vocab.id(kg.surface(n.concept_id)));
  return out;
}

inline Example make_example(const TextPair& pair, const Vocab& vocab, const Grounder& grounder) {
  Example ex;
  const auto src = tokenize(pair.src);
  const auto tgt = tokenize(pair.tgt);
  ex.source = vocab.encode(src);
  ex.graph = grounder.ground(src);
  ex.node_tokens = node_tokens(ex.graph, grounder.kg(), vocab);
  std::vector<ConceptId> targets;
  std::size_t unk = 0;
  for (const auto& w : tgt) {
    const auto id = vocab.id(w);
    unk += id == Vocab::kUnk && w != "[unk]";
    ex.target.push_back(id);
    auto c = grounder.concept_of(w);
    const bool in_graph = c && ex.graph.index_of(*c).has_value();
    ex.gate_labels.push_back(in_graph ? 1 : 0);
    if (in_graph) targets.push_back(*c);
  }
  if (unk) std::cerr << "warning: " << unk << " target token(s) not in vocabulary replaced by [unk]: " << pair.tgt << "\n";
  ex.target.push_back(Vocab::kEos);
  ex.gate_labels.push_back(0);
  for (bool b : bfs_edge_labels(ex.graph, targets)) ex.weak_labels.push_back(b ? 1 : 0);
  return ex;
}

inline std::vector<Example> make_examples(const std::vector<TextPair>& pairs, const Vocab& vocab, const Grounder& grounder) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(make_example(p, vocab, grounder));
  return out;
}

}  // namespace grf
