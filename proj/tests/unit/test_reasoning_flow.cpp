#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "flow_oracles.hpp"

using namespace grf;

namespace {

FlowConfig flow(double gamma, Aggregator agg = Aggregator::Max, std::size_t hops = 2) {
  FlowConfig c;
  c.gamma = gamma;
  c.aggregator = agg;
  c.hops = hops;
  return c;
}

FlowState<double> run(const SubGraph& g, const std::vector<double>& R, const FlowConfig& cfg) {
  return propagate<double>(g, std::span<const double>(R), cfg);
}

// s(0) --r1--> v(1), s --r2--> w(2)
SubGraph fork_graph() {
  SubGraph g;
  g.nodes = {{{0}, 0, true}, {{1}, 1, false}, {{2}, 1, false}};
  g.edges = {{0, {0, false}, 1}, {0, {1, false}, 2}};
  return g;
}

}  // namespace

TEST(Propagate, MaxByHand) {
  auto st = run(fork_graph(), {0.6, 0.2}, flow(0.5));
  EXPECT_DOUBLE_EQ(st.scores[0], 1.0);
  EXPECT_DOUBLE_EQ(st.scores[1], 1.1);
  EXPECT_DOUBLE_EQ(st.scores[2], 0.7);
  EXPECT_EQ(st.level, (std::vector<std::size_t>{0, 1, 1}));
}

TEST(Propagate, MeanByHand) {
  // s -> u1 (R=0.5, ns 1), s -> u2 (R=0, ns 0.5), u1 -> v (0.4), u2 -> v (0.8)
  SubGraph g;
  g.nodes = {{{0}, 0, true}, {{1}, 1, false}, {{2}, 1, false}, {{3}, 2, false}};
  g.edges = {{0, {0, false}, 1}, {0, {0, false}, 2}, {1, {0, false}, 3}, {2, {0, false}, 3}};
  auto st = run(g, {0.5, 0.0, 0.4, 0.8}, flow(0.5, Aggregator::Mean));
  EXPECT_DOUBLE_EQ(st.scores[1], 1.0);
  EXPECT_DOUBLE_EQ(st.scores[2], 0.5);
  EXPECT_NEAR(st.scores[3], 0.975, 1e-15);
}

TEST(Propagate, GammaZeroIsLocalScoring) {
  auto g = fx::diamond();
  const std::vector<double> R{0.3, 0.9, 0.25, 0.6};
  auto mx = run(g, R, flow(0.0));
  EXPECT_EQ(mx.scores[1], 0.3);
  EXPECT_EQ(mx.scores[2], 0.9);
  EXPECT_EQ(mx.scores[3], 0.25);
  auto mean = run(g, R, flow(0.0, Aggregator::Mean));
  EXPECT_EQ(mean.scores[3], 0.25);
}

TEST(Propagate, SourcesScoreOneAndUnreachedExcluded) {
  SubGraph g;
  g.nodes = {{{0}, 0, true}, {{1}, 1, false}, {{2}, 2, false}, {{3}, 0, false}};
  g.edges = {{0, {0, false}, 1}, {1, {0, false}, 2}, {3, {0, false}, 0}};
  auto st = run(g, {0.5, 0.5, 0.5}, flow(0.5, Aggregator::Max, 1));
  EXPECT_EQ(st.scores[0], 1.0);
  EXPECT_FALSE(st.reached(2));
  EXPECT_FALSE(st.reached(3));
  auto p = node_distribution(st);
  EXPECT_EQ(p[2], 0.0);
  EXPECT_EQ(p[3], 0.0);
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
}

TEST(Propagate, RelevanceLengthMismatchIsShapeError) {
  EXPECT_THROW(run(fork_graph(), {0.1}, flow(0.5)), Error);
}

TEST(Propagate, GammaOutsideUnitIntervalRejected) {
  EXPECT_THROW(flow(1.5).validate(), Error);
  EXPECT_THROW(flow(std::nan("")).validate(), Error);
  EXPECT_NO_THROW(flow(1.0).validate());
  EXPECT_EQ(FlowConfig{}.gamma, 0.5);
}

TEST(Propagate, MatchesOraclesOnRandomGraphs) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = fx::random_flow_case(rng);
    for (double gamma : {0.0, 0.5, 1.0})
      for (std::size_t hops : {1u, 2u, 3u}) {
        EXPECT_LT(fx::flow_error(c, gamma, hops, Aggregator::Max), 1e-9);
        EXPECT_LT(fx::flow_error(c, gamma, hops, Aggregator::Mean), 1e-9);
      }
  }
}

TEST(Propagate, ReachabilityIndependentOfGammaAndAggregator) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = fx::random_flow_case(rng);
    const auto lvl = fx::reach_levels(c.graph, 2);
    for (double gamma : {0.0, 0.3, 1.0})
      for (auto agg : {Aggregator::Max, Aggregator::Mean}) {
        auto st = run(c.graph, c.relevance, flow(gamma, agg));
        for (std::size_t v = 0; v < c.graph.size(); ++v) EXPECT_EQ(st.reached(v), lvl[v] != SIZE_MAX);
      }
  }
}

TEST(NodeDistribution, Examples) {
  FlowState<double> st;
  st.scores = {1.1, 0.7, 1.0};
  st.level = {0, 1, 1};
  st.backptr.resize(3);
  auto p = node_distribution(st);
  const double z = std::exp(1.1) + std::exp(0.7) + std::exp(1.0);
  EXPECT_NEAR(p[0], std::exp(1.1) / z, 1e-15);
  EXPECT_NEAR(p[1], std::exp(0.7) / z, 1e-15);
  EXPECT_NEAR(p[2], std::exp(1.0) / z, 1e-15);
  st.scores = {0.4, 0.4, 0.4};
  for (double x : node_distribution(st)) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
  st.level = {0, kUnreached, kUnreached};
  EXPECT_EQ(node_distribution(st), (std::vector<double>{1.0, 0.0, 0.0}));
}

TEST(Trace, ForkTopOneFollowsBackPointer) {
  auto g = fork_graph();
  auto st = run(g, {0.6, 0.2}, flow(0.5));
  auto paths = trace_paths(st, g, 1);
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths[0].node, 1u);
  EXPECT_EQ(paths[0].edges, (std::vector<std::size_t>{0}));
}

TEST(Trace, ChainPathAndTopKBeyondNodeCount) {
  SubGraph g;
  g.nodes = {{{0}, 0, true}, {{1}, 1, false}, {{2}, 2, false}, {{3}, 3, false}};
  g.edges = {{0, {0, false}, 1}, {1, {1, false}, 2}, {2, {1, false}, 3}};
  auto st = run(g, {0.9, 0.9, 0.9}, flow(0.5));
  auto paths = trace_paths(st, g, 10);
  ASSERT_EQ(paths.size(), 3u);  // node 3 is beyond two hops
  for (const auto& p : paths) {
    EXPECT_EQ(p.edges.size(), st.level[p.node]);
    if (p.node == 2) {
      EXPECT_EQ(p.edges, (std::vector<std::size_t>{0, 1}));
    }
  }
}

TEST(Trace, MeanIsUnsupported) {
  auto g = fork_graph();
  auto st = run(g, {0.6, 0.2}, flow(0.5, Aggregator::Mean));
  try {
    trace_paths(st, g, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedTrace);
  }
}

TEST(Trace, TieBreaksOnLowestEdgeIndex) {
  SubGraph g;
  g.nodes = {{{0}, 0, true}, {{1}, 0, true}, {{2}, 1, false}};
  g.edges = {{1, {0, false}, 2}, {0, {0, false}, 2}};
  auto st = run(g, {0.5, 0.5}, flow(0.5));
  EXPECT_EQ(st.backptr[2], 0u);
}

TEST(Trace, FormatsConceptScoreAndPath) {
  auto kg = fx::make_kg({"atlocation", "desires"}, {{"cat", "atlocation", "house", 1}, {"house", "desires", "rug", 1}});
  SubGraph g;
  g.nodes = {{fx::id(kg, "cat"), 0, true}, {fx::id(kg, "house"), 1, false}, {fx::id(kg, "rug"), 2, false}};
  g.edges = {{0, {0, false}, 1}, {1, {1, false}, 2}};
  auto st = run(g, {0.75, 0.25}, flow(0.5));
  auto paths = trace_paths(st, g, 1);
  EXPECT_EQ(format_trace(paths[0], g, kg), "house\t1.25\tcat --atlocation--> house");
  TracedPath two{2, st.scores[2], {0, 1}};
  EXPECT_EQ(format_trace(two, g, kg), "rug\t0.875\tcat --atlocation--> house --desires--> rug");
}

TEST(Relevance, ZeroWeightsOrZeroContextGiveHalf) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<double> hu(3), hr(3), hv(3), ht(4), zero(4, 0.0);
  for (auto* v : {&hu, &hr, &hv, &ht})
    for (auto& x : *v) x = n(rng);
  ad::Tensor<double> w({9, 4}, 0.0);
  EXPECT_EQ(triple_relevance<double>(hu, hr, hv, ht, w), 0.5);
  for (auto& x : w.data) x = n(rng);
  EXPECT_EQ(triple_relevance<double>(hu, hr, hv, zero, w), 0.5);
}

TEST(Relevance, MatrixMatchesDirectDotProduct) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  auto rnd = [&](ad::Shape s) {
    ad::Tensor<double> t(std::move(s));
    for (auto& x : t.data) x = 0.5 * n(rng);
    return t;
  };
  auto g = fx::diamond();
  auto nodes = rnd({4, 3}), rels = rnd({4, 3}), w = rnd({9, 5}), ctx = rnd({2, 5});
  ad::Tape<double> t;
  auto R = relevance_matrix(t.constant(nodes), t.constant(rels), g, 2, t.constant(w), t.constant(ctx)).value();
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      const auto& e = g.edges[k];
      const std::size_t rf = e.relation.flat(2);
      double dot = 0;
      for (std::size_t i = 0; i < 9; ++i) {
        const double trip = i < 3 ? nodes(e.head, i) : i < 6 ? rels(rf, i - 3) : nodes(e.tail, i - 6);
        for (std::size_t j = 0; j < 5; ++j) dot += trip * w(i, j) * ctx(s, j);
      }
      EXPECT_NEAR(R(s, k), 1.0 / (1.0 + std::exp(-dot)), 1e-12);
      EXPECT_NEAR(R(s, k),
                  triple_relevance<double>(std::span(&nodes.data[e.head * 3], 3), std::span(&rels.data[rf * 3], 3),
                                           std::span(&nodes.data[e.tail * 3], 3), std::span(&ctx.data[s * 5], 5), w),
                  1e-12);
    }
}

TEST(Relevance, DimensionMismatch) {
  std::vector<double> a(3), b(2);
  ad::Tensor<double> w({9, 2});
  EXPECT_THROW(triple_relevance<double>(a, a, a, std::vector<double>(3), w), Error);
  EXPECT_THROW(triple_relevance<double>(a, b, a, std::vector<double>(2), w), Error);
}

TEST(FlowScores, DifferentiableMatchesPropagate) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = fx::random_flow_case(rng);
    if (c.graph.edges.empty()) continue;
    for (auto agg : {Aggregator::Max, Aggregator::Mean}) {
      const auto cfg = flow(0.5, agg);
      auto plan = make_flow_plan(c.graph, cfg.hops);
      ad::Tape<double> t;
      auto ns = flow_scores(t.constant(ad::Tensor<double>({1, c.relevance.size()}, c.relevance)), plan, cfg).value();
      auto st = run(c.graph, c.relevance, cfg);
      for (std::size_t v = 0; v < c.graph.size(); ++v) EXPECT_EQ(ns[v], st.scores[v]);
    }
  }
}

TEST(FlowScores, GradientThroughNodeDistribution) {
  for (auto agg : {Aggregator::Max, Aggregator::Mean}) {
    auto m = fx::micro<double>(5, Variant::Full, agg);
    std::vector<ad::Parameter<double>*> ps{&m.model.w_sim};
    m.model.graph.for_each([&](ad::Parameter<double>& p) { ps.push_back(&p); });
    ad::Tensor<double> target({3, 4}, {0.1, 0.7, -0.3, 0.5, 0.2, -0.4, 0.9, 0.3, -0.6, 0.8, 0.05, 0.4});
    auto rep = ad::grad_check_params<double>(
        [&](ad::Tape<double>& t) {
          auto seq = build_sequence(m.ex.source, {4, 5}, m.model.config.max_len);
          auto out = forward_steps(t, m.model, seq, m.ex.graph, m.ex.node_tokens, 2, 3);
          return ad::sum(ad::mul(out.node_dist, t.constant(target)));
        },
        ps);
    EXPECT_TRUE(rep.passed) << to_string(agg) << " worst " << rep.worst;
  }
}
