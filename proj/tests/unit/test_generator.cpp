#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "grf/generator.hpp"

using namespace grf;
using ad::Tensor;

namespace {

DecodeInput input_of(const Example& ex) { return {ex.source, ex.graph, ex.node_tokens}; }

}  // namespace

TEST(Mix, GateZeroIsVocabularySoftmax) {
  ad::Tape<double> t;
  auto logits = t.constant(Tensor<double>({1, 3}, {0.0, 1.0, 2.0}));
  auto nd = t.constant(Tensor<double>({1, 2}, {0.3, 0.7}));
  auto p = mix(logits, nd, {0, 2}, t.constant(Tensor<double>({1, 1}, {0.0}))).value();
  const double z = 1 + std::exp(1.0) + std::exp(2.0);
  EXPECT_NEAR(p[0], 1 / z, 1e-15);
  EXPECT_NEAR(p[1], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(p[2], std::exp(2.0) / z, 1e-15);
}

TEST(Mix, GateOneWithOneHotNodeDistribution) {
  ad::Tape<double> t;
  auto logits = t.constant(Tensor<double>({1, 4}, {0.5, -1.0, 2.0, 0.0}));
  auto p = mix(logits, t.constant(Tensor<double>({1, 2}, {0.0, 1.0})), {1, 3}, t.constant(Tensor<double>({1, 1}, {1.0})))
               .value();
  EXPECT_EQ(p.data, (std::vector<double>{0.0, 0.0, 0.0, 1.0}));
}

TEST(Mix, HalfGateWithSharedToken) {
  ad::Tape<double> t;
  auto logits = t.constant(Tensor<double>({1, 2}, {0.0, 0.0}));
  auto nd = t.constant(Tensor<double>({1, 3}, {0.4, 0.6, 0.0}));
  auto p = mix(logits, nd, {1, 1, 0}, t.constant(Tensor<double>({1, 1}, {0.5}))).value();
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Mix, RowsSumToOneAndLinearInGate) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 30; ++trial) {
    Tensor<double> logits({2, 6}), nd({2, 3});
    for (auto& x : logits.data) x = n(rng);
    for (std::size_t s = 0; s < 2; ++s) {
      double z = 0;
      for (std::size_t v = 0; v < 3; ++v) z += nd(s, v) = std::abs(n(rng)) + 0.01;
      for (std::size_t v = 0; v < 3; ++v) nd(s, v) /= z;
    }
    std::vector<TokenId> toks{static_cast<TokenId>(rng() % 6), static_cast<TokenId>(rng() % 6), static_cast<TokenId>(rng() % 6)};
    ad::Tape<double> t;
    auto at = [&](double g) {
      return mix(t.constant(logits), t.constant(nd), toks, t.constant(Tensor<double>({2, 1}, {g, g}))).value();
    };
    auto p0 = at(0.0), p1 = at(1.0), ph = at(0.3);
    for (std::size_t s = 0; s < 2; ++s) {
      double sum = 0;
      for (std::size_t v = 0; v < 6; ++v) {
        sum += ph(s, v);
        EXPECT_NEAR(ph(s, v), 0.3 * p1(s, v) + 0.7 * p0(s, v), 1e-14);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Mix, GradientCheck) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  Tensor<double> l0({2, 5}), s0({2, 3}), g0({2, 1}), w({2, 5});
  for (auto* x : {&l0, &s0, &g0, &w})
    for (auto& v : x->data) v = n(rng);
  ad::Parameter<double> logits{"l", l0}, scores{"s", s0}, gate{"g", g0};
  std::vector<ad::Parameter<double>*> ps{&logits, &scores, &gate};
  auto rep = ad::grad_check_params<double>(
      [&](ad::Tape<double>& t) {
        auto p = mix(t.param(logits), ad::softmax_rows(t.param(scores)), {4, 0, 4}, ad::sigmoid(t.param(gate)));
        return ad::sum(ad::mul(ad::log(p), t.constant(w)));
      },
      ps);
  EXPECT_TRUE(rep.passed) << rep.worst;
}

TEST(Search, ZeroLengthAndEosFirst) {
  auto sc = fx::toy_scorer();
  EXPECT_TRUE(greedy_search(sc, 0, 1).empty());
  auto b = beam_search(sc, 3, 0, 1);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_TRUE(b[0].tokens.empty());
  EXPECT_FALSE(b[0].finished);
  Scorer eos_first = [](const std::vector<TokenId>&) { return std::vector<double>{std::log(0.1), std::log(0.8), std::log(0.1)}; };
  EXPECT_TRUE(greedy_search(eos_first, 5, 1).empty());
  auto h = beam_search(eos_first, 1, 5, 1);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_TRUE(h[0].finished);
  EXPECT_TRUE(h[0].tokens.empty());
  EXPECT_NEAR(h[0].logprob, std::log(0.8), 1e-15);
  EXPECT_THROW(beam_search(eos_first, 0, 5, 1), Error);
}

TEST(Search, GreedyFollowsArgmax) { EXPECT_EQ(greedy_search(fx::toy_scorer(), 3, 1), (std::vector<TokenId>{0})); }

TEST(Search, BeamMatchesExhaustiveOnToy) {
  auto sc = fx::toy_scorer();
  auto beam = beam_search(sc, 3, 3, 1);
  auto all = exhaustive_search(sc, 3, 3, 1);
  ASSERT_GE(beam.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(beam[i].tokens, all[i].tokens) << i;
    EXPECT_EQ(beam[i].finished, all[i].finished) << i;
    EXPECT_NEAR(beam[i].logprob, all[i].logprob, 1e-12) << i;
  }
  EXPECT_EQ(beam[0].tokens, (std::vector<TokenId>{2, 2}));
  EXPECT_NEAR(beam[0].normalized(), std::log(0.4 * 0.8 * 0.9) / 3, 1e-12);
  for (const auto& h : beam) {
    auto it = std::find_if(all.begin(), all.end(), [&](const Hypothesis& a) { return a.tokens == h.tokens && a.finished == h.finished; });
    ASSERT_NE(it, all.end());
    EXPECT_NEAR(it->logprob, h.logprob, 1e-12);
  }
  // greedy stops after "a eos" with a worse normalized score
  EXPECT_GT(beam[0].normalized(), std::log(0.5 * 0.6) / 2);
}

TEST(Search, BeamOneEqualsGreedyOnModels) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto m = fx::micro<double>(seed);
    const auto in = input_of(m.ex);
    auto g = decode_greedy(m.model, in, 6);
    auto b = decode_beam(m.model, in, 1, 6);
    ASSERT_FALSE(b.empty());
    EXPECT_EQ(b[0].tokens, g) << "seed " << seed;
  }
}

TEST(Search, BeamThreeNotWorseThanGreedy) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto m = fx::micro<double>(seed);
    const auto in = input_of(m.ex);
    auto sc = model_scorer(m.model, in);
    auto g = beam_search(sc, 1, 6);
    auto b = beam_search(sc, 3, 6);
    EXPECT_GE(b[0].normalized(), g[0].normalized() - 1e-12) << "seed " << seed;
  }
}

TEST(Search, BeamRankingAgreesWithExhaustiveOnModel) {
  auto m = fx::micro<double>(7);
  const auto in = input_of(m.ex);
  auto sc = model_scorer(m.model, in);
  auto all = exhaustive_search(sc, m.model.vocab.size(), 2);
  auto beam = beam_search(sc, m.model.vocab.size() * m.model.vocab.size(), 2);
  ASSERT_EQ(beam.size(), all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_EQ(beam[i].tokens, all[i].tokens);
    EXPECT_NEAR(beam[i].logprob, all[i].logprob, 1e-12);
  }
}

TEST(Decode, CapRespectsPositionTable) {
  auto m = fx::micro<double>();
  const auto in = input_of(m.ex);
  EXPECT_EQ(decode_cap(m.model, in, 100), 6u);
  EXPECT_LE(decode_greedy(m.model, in, 100).size(), 6u);
}

TEST(Decode, TraceReportsGateAndPaths) {
  auto m = fx::micro<double>();
  const auto in = input_of(m.ex);
  auto steps = trace_greedy(m.model, in, 4, 2);
  auto g = decode_greedy(m.model, in, 4);
  ASSERT_GE(steps.size(), g.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    EXPECT_GT(steps[i].gate, 0.0);
    EXPECT_LT(steps[i].gate, 1.0);
    EXPECT_LE(steps[i].paths.size(), 2u);
    if (i < g.size()) {
      EXPECT_EQ(steps[i].token, g[i]);
    }
  }
}
