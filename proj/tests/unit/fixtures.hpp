#pragma once

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "grf/grf.hpp"

namespace fx {

using Fwd = std::vector<std::tuple<std::string, std::string, std::string, float>>;

inline grf::KnowledgeGraph make_kg(const std::vector<std::string>& relations, const Fwd& triples) {
  std::vector<std::string> surfaces;
  for (const auto& [h, r, t, w] : triples) {
    surfaces.push_back(h);
    surfaces.push_back(t);
  }
  return grf::KnowledgeGraph::build(grf::RelationVocab(relations), surfaces, triples);
}

inline grf::ConceptId id(const grf::KnowledgeGraph& kg, const std::string& s) { return kg.find(s).value(); }

inline std::vector<std::string> surfaces(const grf::SubGraph& g, const grf::KnowledgeGraph& kg) {
  std::vector<std::string> out;
  for (const auto& n : g.nodes) out.push_back(kg.surface(n.concept_id));
  return out;
}

/// 4-node subgraph s -> a -> b, s -> c, c -> a with one source and two relations.
inline grf::SubGraph diamond() {
  grf::SubGraph g;
  g.nodes = {{{0}, 0, true}, {{1}, 1, false}, {{2}, 1, false}, {{3}, 2, false}};
  g.edges = {{0, {0, false}, 1}, {0, {1, false}, 2}, {1, {0, false}, 3}, {2, {1, true}, 1}};
  return g;
}

/// Micro model plus one example: d=8, 4 nodes, 6-token sequence.
template <class T>
struct Micro {
  grf::GrfModel<T> model;
  grf::Example ex;
};

template <class T>
Micro<T> micro(std::uint64_t seed = 3, grf::Variant variant = grf::Variant::Full, grf::Aggregator agg = grf::Aggregator::Max) {
  grf::Vocab v({"s", "a", "b", "c", "the", "went"});
  grf::ModelConfig mc;
  mc.d_model = 8;
  mc.d_graph = 8;
  mc.heads = 2;
  mc.layers = 2;
  mc.graph_layers = 2;
  mc.max_len = 8;
  mc.variant = variant;
  grf::FlowConfig fc;
  fc.aggregator = agg;
  Micro<T> m{grf::GrfModel<T>::init(mc, fc, v, grf::RelationVocab({"r0", "r1"}), seed), {}};
  m.ex.source = {v.id("the"), v.id("s")};
  m.ex.target = {v.id("went"), v.id("b"), v.id("a"), grf::Vocab::kEos};
  m.ex.graph = diamond();
  m.ex.node_tokens = {v.id("s"), v.id("a"), v.id("c"), v.id("b")};
  m.ex.gate_labels = {0, 1, 1, 0};
  m.ex.weak_labels = {1, 0, 1, 0};
  return m;
}

/// Three-step toy scorer over {0: a, 1: eos, 2: b}; greedy stops at "a eos"
/// while "b b eos" has the best length-normalized score.
inline grf::Scorer toy_scorer() {
  static const std::map<std::vector<grf::TokenId>, std::vector<double>> table{
      {{}, {0.5, 0.1, 0.4}},       {{0}, {0.2, 0.6, 0.2}},       {{2}, {0.1, 0.1, 0.8}},
      {{0, 0}, {0.05, 0.9, 0.05}}, {{0, 2}, {0.05, 0.9, 0.05}}, {{2, 0}, {0.05, 0.9, 0.05}},
      {{2, 2}, {0.05, 0.9, 0.05}},
  };
  return [](const std::vector<grf::TokenId>& prefix) {
    auto it = table.find(prefix);
    std::vector<double> p = it == table.end() ? std::vector<double>{0.3, 0.4, 0.3} : it->second;
    for (auto& x : p) x = std::log(x);
    return p;
  };
}

}  // namespace fx
