#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "extraction_cases.hpp"

using namespace grf;

namespace {

fx::Fwd random_triples(std::mt19937_64& rng, std::size_t concepts, std::size_t count) {
  fx::Fwd t;
  for (std::size_t i = 0; i < count; ++i) {
    auto h = rng() % concepts, r = rng() % 3, tl = rng() % concepts;
    t.emplace_back("c" + std::to_string(h), "r" + std::to_string(r + 1), "c" + std::to_string(tl), 1.0f);
  }
  return t;
}

KnowledgeGraph random_kg(std::mt19937_64& rng, std::size_t concepts, std::size_t count) {
  auto t = random_triples(rng, concepts, count);
  std::vector<std::string> s;
  for (std::size_t i = 0; i < concepts; ++i) s.push_back("c" + std::to_string(i));
  return KnowledgeGraph::build(RelationVocab({"r1", "r2", "r3"}), s, t);
}

std::vector<ConceptId> random_sources(std::mt19937_64& rng, const KnowledgeGraph& kg) {
  std::set<ConceptId> s;
  const std::size_t k = 1 + rng() % 3;
  while (s.size() < k) s.insert(ConceptId{static_cast<std::uint32_t>(rng() % kg.num_concepts())});
  return {s.begin(), s.end()};
}

SubGraph random_subgraph(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  SubGraph g;
  for (std::size_t i = 0; i < n; ++i) g.nodes.push_back({ConceptId{static_cast<std::uint32_t>(i)}, 0, i == 0 || rng() % 6 == 0});
  for (std::size_t k = 0; k < m; ++k) {
    auto h = rng() % n, t = rng() % n;
    if (h != t) g.edges.push_back({h, RelationId{static_cast<std::uint32_t>(rng() % 2), false}, t});
  }
  return g;
}

/// Labels by enumerating every simple path from every source.
std::vector<bool> enumerate_labels(const SubGraph& g, const std::vector<ConceptId>& targets) {
  const std::size_t n = g.size();
  std::vector<std::vector<std::vector<std::size_t>>> paths_to(n);  // edge lists
  std::vector<bool> on(n, false);
  std::vector<std::size_t> stack;
  std::function<void(std::size_t)> dfs = [&](std::size_t u) {
    paths_to[u].push_back(stack);
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      if (g.edges[k].head != u || on[g.edges[k].tail]) continue;
      on[g.edges[k].tail] = true;
      stack.push_back(k);
      dfs(g.edges[k].tail);
      stack.pop_back();
      on[g.edges[k].tail] = false;
    }
  };
  for (auto s : g.source_indices()) {
    on.assign(n, false);
    on[s] = true;
    dfs(s);
  }
  std::vector<bool> labels(g.edges.size(), false);
  for (auto c : targets) {
    auto t = g.index_of(c);
    if (!t || paths_to[*t].empty()) continue;
    std::size_t best = SIZE_MAX;
    for (const auto& p : paths_to[*t]) best = std::min(best, p.size());
    if (best == 0) continue;
    for (const auto& p : paths_to[*t])
      if (p.size() == best)
        for (auto k : p) labels[k] = true;
  }
  return labels;
}

}  // namespace

TEST(Match, LemmaTableMapsInflectedForm) {
  auto kg = fx::make_kg({"r"}, {{"volcano", "r", "lava", 1}});
  Lexicons lex;
  lex.lemmatizer.add("volcanoes", "volcano");
  auto m = match_concepts({"the", "volcanoes", "erupt"}, kg, lex, false);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].token_index, 1u);
  EXPECT_EQ(m[0].concept_id, fx::id(kg, "volcano"));
}

TEST(Match, StopWordAndUnknownWordGiveNothing) {
  auto kg = fx::make_kg({"r"}, {{"the", "r", "lava", 1}});
  Lexicons lex;
  lex.stopwords = WordSet{"the"};
  EXPECT_TRUE(match_concepts({"the"}, kg, lex, false).empty());
  EXPECT_TRUE(match_concepts({"zzzq"}, kg, lex, false).empty());
}

TEST(Match, SuffixFallbackAndPosFilter) {
  auto kg = fx::make_kg({"r"}, {{"rock", "r", "lava", 1}});
  Lexicons lex;
  auto m = match_concepts({"rocks", "lava"}, kg, lex, false);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0].concept_id, fx::id(kg, "rock"));
  lex.pos = WordSet{"lava"};
  m = match_concepts({"rocks", "lava"}, kg, lex, true);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].concept_id, fx::id(kg, "lava"));
}

TEST(Extract, CraftedCases) {
  for (const auto& c : fx::extraction_cases()) EXPECT_EQ(fx::check_case(c), "") << c.name;
}

TEST(Extract, NoSourcesIsEmptyGrounding) {
  auto kg = fx::make_kg({"r"}, {{"a", "r", "b", 1}});
  try {
    extract_subgraph(kg, {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyGrounding);
  }
}

TEST(Extract, DefaultsAreTwoHopsAndTopHundred) {
  ExtractionConfig c;
  EXPECT_EQ(c.hops, 2u);
  EXPECT_EQ(c.top_b, 100u);
  c.hops = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Extract, HopLevelEqualsBfsDistanceAndEdgesValid) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto kg = random_kg(rng, 14, 20);
    ExtractionConfig cfg;
    cfg.hops = 1 + rng() % 3;
    cfg.top_b = 1 + rng() % 4;
    const auto src = random_sources(rng, kg);
    auto g = extract_subgraph(kg, src, cfg);
    std::vector<std::size_t> dist(g.size(), SIZE_MAX);
    std::vector<std::size_t> q;
    for (auto s : g.source_indices()) {
      dist[s] = 0;
      q.push_back(s);
    }
    for (std::size_t i = 0; i < q.size(); ++i)
      for (const auto& e : g.edges) {
        ASSERT_LT(e.head, g.size());
        ASSERT_LT(e.tail, g.size());
        if (e.head == q[i] && dist[e.tail] == SIZE_MAX) {
          dist[e.tail] = dist[q[i]] + 1;
          q.push_back(e.tail);
        }
      }
    for (std::size_t v = 0; v < g.size(); ++v) {
      EXPECT_EQ(g.nodes[v].hop_level, dist[v]);
      EXPECT_LE(dist[v], cfg.hops);
      EXPECT_EQ(g.nodes[v].is_source, dist[v] == 0);
    }
    EXPECT_EQ(g, extract_subgraph(kg, src, cfg));
  }
}

TEST(Extract, MonotoneInBForOneHop) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    auto kg = random_kg(rng, 12, 25);
    auto src = random_sources(rng, kg);
    ExtractionConfig small, large;
    small.hops = large.hops = 1;
    small.top_b = 1 + rng() % 3;
    large.top_b = small.top_b + rng() % 4;
    auto a = extract_subgraph(kg, src, small), b = extract_subgraph(kg, src, large);
    for (const auto& n : a.nodes) EXPECT_TRUE(b.index_of(n.concept_id).has_value());
  }
}

TEST(WeakLabels, ChainWithSideBranch) {
  SubGraph g;
  g.nodes = {{{0}, 0, true}, {{1}, 1, false}, {{2}, 2, false}, {{3}, 1, false}};
  g.edges = {{0, {0, false}, 1}, {1, {0, false}, 2}, {0, {0, false}, 3}};
  EXPECT_EQ(bfs_edge_labels(g, {ConceptId{2}}), (std::vector<bool>{true, true, false}));
  EXPECT_EQ(bfs_edge_labels(g, {ConceptId{0}}), (std::vector<bool>{false, false, false}));
  EXPECT_EQ(bfs_edge_labels(g, {ConceptId{9}}), (std::vector<bool>{false, false, false}));
  EXPECT_EQ(bfs_edge_labels(g, {}), (std::vector<bool>{false, false, false}));
}

TEST(WeakLabels, MatchPathEnumeration) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 11;
    auto g = random_subgraph(rng, n, rng() % 25);
    std::vector<ConceptId> targets;
    for (std::size_t k = 0, K = rng() % 4; k < K; ++k) targets.push_back(ConceptId{static_cast<std::uint32_t>(rng() % (n + 2))});
    EXPECT_EQ(bfs_edge_labels(g, targets), enumerate_labels(g, targets)) << "trial " << trial;
  }
}

TEST(SubGraphJson, RoundTrip) {
  const auto c = fx::extraction_cases()[0];
  auto kg = fx::case_kg(c);
  auto g = fx::run_case(c, kg);
  auto j = subgraph_to_json(g, kg);
  EXPECT_EQ(subgraph_from_json(j, kg), g);
  EXPECT_EQ(j["nodes"][0]["surface"], "a");
  EXPECT_EQ(j["nodes"][0]["is_source"], true);
  j["nodes"][0]["surface"] = "nope";
  EXPECT_THROW(subgraph_from_json(j, kg), Error);
}
