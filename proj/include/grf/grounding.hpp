#pragma once

// Concept matching, H-hop subgraph extraction with top-B in-degree pruning, and
// shortest-path weak labels for the edges.

#include <algorithm>
#include <deque>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "grf/kg_store.hpp"
#include "grf/text.hpp"

namespace grf {

struct ConceptMention {
  std::size_t token_index = 0;
  ConceptId concept_id;
};

struct Lexicons {
  Lemmatizer lemmatizer;
  WordSet stopwords;
  WordSet pos;  // noun/verb lemmas; consulted only with pos_filter
};

struct ExtractionConfig {
  std::size_t hops = 2;
  std::size_t top_b = 100;
  bool pos_filter = false;

  void validate() const {
    if (hops < 1) throw Error(ErrorCode::Config, "extraction: hops must be >= 1");
    if (top_b < 1) throw Error(ErrorCode::Config, "extraction: top_b must be >= 1");
  }
};

struct SubGraphNode {
  ConceptId concept_id;
  std::size_t hop_level = 0;
  bool is_source = false;

  bool operator==(const SubGraphNode&) const = default;
};

struct SubGraphEdge {
  std::size_t head = 0;
  RelationId relation;
  std::size_t tail = 0;

  bool operator==(const SubGraphEdge&) const = default;
};

/// Nodes ordered by (hop_level, concept id); edges by (head, relation, tail).
struct SubGraph {
  std::vector<SubGraphNode> nodes;
  std::vector<SubGraphEdge> edges;

  std::size_t size() const { return nodes.size(); }

  std::optional<std::size_t> index_of(ConceptId c) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].concept_id == c) return i;
    return std::nullopt;
  }

  std::vector<std::size_t> source_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].is_source) out.push_back(i);
    return out;
  }

  bool operator==(const SubGraph&) const = default;
};

inline bool is_punctuation(std::string_view tok) {
  return tok.size() == 1 && std::string_view(".,!?;:\"()[]{}").find(tok[0]) != std::string_view::npos;
}

/// Mentions whose lemma is a KG concept, not a stop word and (with pos_filter)
/// listed in the noun/verb lexicon.
inline std::vector<ConceptMention> match_concepts(const std::vector<std::string>& tokens, const KnowledgeGraph& kg,
                                                  const Lexicons& lex, bool pos_filter) {
  std::vector<ConceptMention> out;
  auto known = [&kg](std::string_view w) { return kg.contains(w); };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_punctuation(tokens[i]) || lex.stopwords.contains(tokens[i])) continue;
    const std::string lemma = lex.lemmatizer.lemmatize(tokens[i], known);
    if (lex.stopwords.contains(lemma)) continue;
    auto c = kg.find(lemma);
    if (!c) continue;
    if (pos_filter && !lex.pos.contains(lemma)) continue;
    out.push_back({i, *c});
  }
  return out;
}

namespace detail {

/// Multi-source BFS distances over the subgraph's directed edges.
inline std::vector<std::size_t> bfs_levels(std::size_t n, const std::vector<SubGraphEdge>& edges,
                                           const std::vector<std::size_t>& sources) {
  constexpr auto inf = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> out(n);
  for (const auto& e : edges) out[e.head].push_back(e.tail);
  std::vector<std::size_t> dist(n, inf);
  std::deque<std::size_t> q;
  for (auto s : sources) {
    dist[s] = 0;
    q.push_back(s);
  }
  while (!q.empty()) {
    auto u = q.front();
    q.pop_front();
    for (auto v : out[u])
      if (dist[v] == inf) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  return dist;
}

}  // namespace detail

/// Grows the subgraph for cfg.hops rounds. Each round scores every new direct
/// neighbour by how many distinct current nodes link to it, keeps the top B by
/// (score desc, concept id asc), then all KG edges among kept nodes are added.
/// Hop levels are BFS distances in the final subgraph.
inline SubGraph extract_subgraph(const KnowledgeGraph& kg, const std::vector<ConceptId>& sources,
                                 const ExtractionConfig& cfg) {
  cfg.validate();
  if (sources.empty()) throw Error(ErrorCode::EmptyGrounding, "extract_subgraph: no source concepts (EmptyGrounding)");
  std::set<ConceptId> included(sources.begin(), sources.end());
  for (auto c : included) (void)kg.neighbors(c);  // validates ids

  for (std::size_t hop = 1; hop <= cfg.hops; ++hop) {
    std::map<ConceptId, std::size_t> degree;
    for (auto u : included)
      for (const auto& e : kg.neighbors(u))
        if (!included.count(e.tail)) ++degree[e.tail];
    if (degree.empty()) break;
    std::vector<std::pair<std::size_t, ConceptId>> ranked;
    for (const auto& [c, d] : degree) ranked.emplace_back(d, c);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (ranked.size() > cfg.top_b) ranked.resize(cfg.top_b);
    for (const auto& [d, c] : ranked) included.insert(c);
  }

  std::vector<ConceptId> ids(included.begin(), included.end());
  std::map<ConceptId, std::size_t> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) pos[ids[i]] = i;
  std::vector<SubGraphEdge> edges;
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (const auto& e : kg.neighbors(ids[i]))
      if (auto it = pos.find(e.tail); it != pos.end()) edges.push_back({i, e.relation, it->second});

  std::set<ConceptId> src_set(sources.begin(), sources.end());
  std::vector<std::size_t> src_idx;
  for (auto c : src_set) src_idx.push_back(pos[c]);
  const auto level = detail::bfs_levels(ids.size(), edges, src_idx);

  // Reorder by (level, id).
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return level[a] != level[b] ? level[a] < level[b] : ids[a] < ids[b];
  });
  std::vector<std::size_t> remap(ids.size());
  SubGraph g;
  for (std::size_t k = 0; k < order.size(); ++k) {
    remap[order[k]] = k;
    g.nodes.push_back({ids[order[k]], level[order[k]], src_set.count(ids[order[k]]) > 0});
  }
  const std::size_t nc = kg.relations().num_canonical();
  for (auto& e : edges) g.edges.push_back({remap[e.head], e.relation, remap[e.tail]});
  std::sort(g.edges.begin(), g.edges.end(), [nc](const SubGraphEdge& a, const SubGraphEdge& b) {
    return std::make_tuple(a.head, a.relation.flat(nc), a.tail) < std::make_tuple(b.head, b.relation.flat(nc), b.tail);
  });
  return g;
}

/// 1 for every edge on some shortest path from the source set to a target
/// concept in g (distances are multi-source BFS distances); 0 elsewhere.
inline std::vector<bool> bfs_edge_labels(const SubGraph& g, const std::vector<ConceptId>& targets) {
  std::vector<bool> labels(g.edges.size(), false);
  const auto dist = detail::bfs_levels(g.size(), g.edges, g.source_indices());
  constexpr auto inf = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> in_edges(g.size());
  for (std::size_t k = 0; k < g.edges.size(); ++k) in_edges[g.edges[k].tail].push_back(k);

  std::vector<bool> on_path(g.size(), false);
  std::deque<std::size_t> q;
  for (auto c : targets) {
    auto t = g.index_of(c);
    if (!t || dist[*t] == inf || dist[*t] == 0 || on_path[*t]) continue;
    on_path[*t] = true;
    q.push_back(*t);
  }
  while (!q.empty()) {
    auto v = q.front();
    q.pop_front();
    for (auto k : in_edges[v]) {
      const auto u = g.edges[k].head;
      if (dist[u] == inf || dist[u] + 1 != dist[v]) continue;
      labels[k] = true;
      if (!on_path[u]) {
        on_path[u] = true;
        q.push_back(u);
      }
    }
  }
  return labels;
}

inline nlohmann::json subgraph_to_json(const SubGraph& g, const KnowledgeGraph& kg) {
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (const auto& n : g.nodes)
    nodes.push_back({{"surface", kg.surface(n.concept_id)}, {"hop_level", n.hop_level}, {"is_source", n.is_source}});
  for (const auto& e : g.edges)
    edges.push_back({{"head", kg.surface(g.nodes[e.head].concept_id)},
                     {"relation", kg.relations().name(e.relation)},
                     {"tail", kg.surface(g.nodes[e.tail].concept_id)}});
  return {{"nodes", nodes}, {"edges", edges}};
}

inline SubGraph subgraph_from_json(const nlohmann::json& j, const KnowledgeGraph& kg) {
  SubGraph g;
  std::map<std::string, std::size_t> idx;
  try {
    for (const auto& n : j.at("nodes")) {
      const auto surface = n.at("surface").get<std::string>();
      auto c = kg.find(surface);
      if (!c) throw Error(ErrorCode::InvalidId, "subgraph json: unknown concept '" + surface + "'");
      idx[surface] = g.nodes.size();
      g.nodes.push_back({*c, n.at("hop_level").get<std::size_t>(), n.at("is_source").get<bool>()});
    }
    for (const auto& e : j.at("edges")) {
      auto h = idx.find(e.at("head").get<std::string>());
      auto t = idx.find(e.at("tail").get<std::string>());
      auto r = kg.relations().find(e.at("relation").get<std::string>());
      if (h == idx.end() || t == idx.end() || !r) throw Error(ErrorCode::Format, "subgraph json: edge references unknown node or relation");
      g.edges.push_back({h->second, *r, t->second});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, std::string("subgraph json: ") + e.what());
  }
  return g;
}

}  // namespace grf
