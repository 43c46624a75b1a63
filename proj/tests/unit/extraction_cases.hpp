#pragma once

// Hand-computed extraction results on small crafted graphs. Expected edges are
// listed as forward triples; both directions must be present in the result.

#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"

namespace fx {

struct ExtractionCase {
  std::string name;
  Fwd triples;
  std::vector<std::string> extra_concepts;  // concepts without triples
  std::vector<std::string> sources;
  std::size_t hops, top_b;
  std::set<std::string> nodes;
  std::vector<std::tuple<std::string, std::string, std::string>> edges;
  std::vector<std::pair<std::string, std::size_t>> levels;  // spot checks
};

inline std::vector<ExtractionCase> extraction_cases() {
  return {
      {"two hops, both candidates kept",
       {{"a", "r1", "b", 1}, {"b", "r2", "c", 1}, {"a", "r1", "d", 1}, {"e", "r3", "b", 1}},
       {},
       {"a"},
       2,
       2,
       {"a", "b", "c", "d", "e"},
       {{"a", "r1", "b"}, {"b", "r2", "c"}, {"a", "r1", "d"}, {"e", "r3", "b"}},
       {{"a", 0}, {"b", 1}, {"d", 1}, {"c", 2}, {"e", 2}}},
      {"parallel edges raise in-degree",
       {{"a", "r1", "b", 1}, {"a", "r2", "b", 1}, {"a", "r1", "d", 1}},
       {},
       {"a"},
       1,
       1,
       {"a", "b"},
       {{"a", "r1", "b"}, {"a", "r2", "b"}},
       {{"b", 1}}},
      {"isolated source",
       {{"x", "r1", "y", 1}},
       {"z"},
       {"z"},
       2,
       100,
       {"z"},
       {},
       {{"z", 0}}},
      {"tie broken by ascending concept id",
       {{"a", "r1", "c", 1}, {"a", "r1", "b", 1}, {"a", "r1", "d", 1}},
       {},
       {"a"},
       1,
       2,
       {"a", "b", "c"},
       {{"a", "r1", "b"}, {"a", "r1", "c"}},
       {}},
      {"reachable only through inverse edges",
       {{"b", "r1", "a", 1}, {"c", "r2", "b", 1}},
       {},
       {"a"},
       2,
       10,
       {"a", "b", "c"},
       {{"b", "r1", "a"}, {"c", "r2", "b"}},
       {{"b", 1}, {"c", 2}}},
      {"truncation at hop 1 changes hop 2",
       {{"a", "r1", "b", 1}, {"a", "r1", "c", 1}, {"b", "r1", "x", 1}, {"c", "r1", "x", 1}, {"b", "r1", "y", 1}, {"c", "r2", "z", 1}},
       {},
       {"a"},
       2,
       1,
       {"a", "b", "c"},
       {{"a", "r1", "b"}, {"a", "r1", "c"}},
       {{"b", 1}, {"c", 1}}},
      {"degree beats id order across sources",
       {{"a", "r1", "x", 1}, {"b", "r1", "x", 1}, {"a", "r1", "w", 1}},
       {},
       {"a", "b"},
       1,
       1,
       {"a", "b", "x"},
       {{"a", "r1", "x"}, {"b", "r1", "x"}},
       {{"a", 0}, {"b", 0}, {"x", 1}}},
      {"same-hop cross edge kept",
       {{"a", "r1", "b", 1}, {"a", "r1", "c", 1}, {"b", "r2", "c", 1}},
       {},
       {"a"},
       1,
       5,
       {"a", "b", "c"},
       {{"a", "r1", "b"}, {"a", "r1", "c"}, {"b", "r2", "c"}},
       {}},
      {"hop limit stops the chain",
       {{"a", "r1", "b", 1}, {"b", "r1", "c", 1}, {"c", "r1", "d", 1}},
       {},
       {"a"},
       2,
       100,
       {"a", "b", "c"},
       {{"a", "r1", "b"}, {"b", "r1", "c"}},
       {{"c", 2}}},
      {"mixed directions from two sources",
       {{"a", "r1", "b", 1}, {"c", "r1", "b", 1}, {"c", "r2", "d", 1}, {"e", "r3", "c", 1}},
       {},
       {"a", "c"},
       1,
       2,
       {"a", "b", "c", "d"},
       {{"a", "r1", "b"}, {"c", "r1", "b"}, {"c", "r2", "d"}},
       {{"b", 1}, {"d", 1}}},
  };
}

inline grf::KnowledgeGraph case_kg(const ExtractionCase& c) {
  std::vector<std::string> surfaces = c.extra_concepts;
  for (const auto& [h, r, t, w] : c.triples) {
    surfaces.push_back(h);
    surfaces.push_back(t);
  }
  return grf::KnowledgeGraph::build(grf::RelationVocab({"r1", "r2", "r3"}), surfaces, c.triples);
}

inline grf::SubGraph run_case(const ExtractionCase& c, const grf::KnowledgeGraph& kg) {
  std::vector<grf::ConceptId> src;
  for (const auto& s : c.sources) src.push_back(id(kg, s));
  grf::ExtractionConfig cfg;
  cfg.hops = c.hops;
  cfg.top_b = c.top_b;
  return grf::extract_subgraph(kg, src, cfg);
}

/// Empty string when the result matches; otherwise a description of the first difference.
inline std::string check_case(const ExtractionCase& c) {
  const auto kg = case_kg(c);
  const auto g = run_case(c, kg);
  const auto names = surfaces(g, kg);
  if (std::set<std::string>(names.begin(), names.end()) != c.nodes || names.size() != c.nodes.size()) return "node set differs";
  std::set<std::tuple<std::string, std::string, std::string>> want, got;
  for (const auto& [h, r, t] : c.edges) {
    want.emplace(h, r, t);
    want.emplace(t, r + "_inv", h);
  }
  for (const auto& e : g.edges)
    got.emplace(names[e.head], kg.relations().name(e.relation), names[e.tail]);
  if (got != want || got.size() != g.edges.size()) return "edge set differs";
  for (const auto& [s, lvl] : c.levels) {
    auto i = g.index_of(id(kg, s));
    if (!i || g.nodes[*i].hop_level != lvl) return "hop level of " + s + " differs";
  }
  for (const auto& n : g.nodes) {
    const bool src = std::find(c.sources.begin(), c.sources.end(), kg.surface(n.concept_id)) != c.sources.end();
    if (n.is_source != src) return "source flag differs";
  }
  return "";
}

}  // namespace fx
