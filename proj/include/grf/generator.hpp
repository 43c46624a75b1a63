#pragma once

// Greedy and beam decoding over the gated mixture, plus per-step tracing.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "grf/model.hpp"

namespace grf {

/// Next-token log-probabilities given the generated prefix.
using Scorer = std::function<std::vector<double>(const std::vector<TokenId>& prefix)>;

struct Hypothesis {
  std::vector<TokenId> tokens;  // without [eos]
  double logprob = 0.0;
  bool finished = false;  // ended with [eos]

  /// Log-prob divided by the number of scored tokens ([eos] included).
  double normalized() const {
    const std::size_t n = tokens.size() + (finished ? 1 : 0);
    return n ? logprob / static_cast<double>(n) : 0.0;
  }
};

inline std::vector<TokenId> greedy_search(const Scorer& score, std::size_t max_len, TokenId eos = Vocab::kEos) {
  std::vector<TokenId> out;
  while (out.size() < max_len) {
    const auto lp = score(out);
    const auto tok = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (tok == eos) break;
    out.push_back(tok);
  }
  return out;
}

/// Keeps the `beam` best expansions by cumulative log-prob (ties by beam index,
/// then token). Expansions ending in [eos] leave the active set; search stops
/// when nothing is active or after max_len tokens. Results are ranked by
/// normalized score.
inline std::vector<Hypothesis> beam_search(const Scorer& score, std::size_t beam, std::size_t max_len,
                                           TokenId eos = Vocab::kEos) {
  if (beam < 1) throw Error(ErrorCode::Config, "beam_search: beam must be >= 1");
  std::vector<Hypothesis> active{Hypothesis{}}, done;
  for (std::size_t step = 0; step < max_len && !active.empty(); ++step) {
    struct Cand {
      double logprob;
      std::size_t parent;
      TokenId token;
    };
    std::vector<Cand> cands;
    for (std::size_t b = 0; b < active.size(); ++b) {
      const auto lp = score(active[b].tokens);
      for (TokenId t = 0; t < lp.size(); ++t) cands.push_back({active[b].logprob + lp[t], b, t});
    }
    const std::size_t keep = std::min(beam, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Cand& a, const Cand& b) {
                        if (a.logprob != b.logprob) return a.logprob > b.logprob;
                        if (a.parent != b.parent) return a.parent < b.parent;
                        return a.token < b.token;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t k = 0; k < keep; ++k) {
      Hypothesis h{active[cands[k].parent].tokens, cands[k].logprob, false};
      if (cands[k].token == eos) {
        h.finished = true;
        done.push_back(std::move(h));
      } else {
        h.tokens.push_back(cands[k].token);
        next.push_back(std::move(h));
      }
    }
    active = std::move(next);
  }
  for (auto& h : active) done.push_back(std::move(h));
  std::stable_sort(done.begin(), done.end(), [](const Hypothesis& a, const Hypothesis& b) { return a.normalized() > b.normalized(); });
  return done;
}

/// Every sequence of at most max_len tokens (terminated by [eos] or the cap) with
/// its log-prob, ranked like beam_search. Exponential; for small test models.
inline std::vector<Hypothesis> exhaustive_search(const Scorer& score, std::size_t vocab, std::size_t max_len,
                                                 TokenId eos = Vocab::kEos) {
  std::vector<Hypothesis> done;
  std::function<void(Hypothesis)> walk = [&](Hypothesis h) {
    if (h.tokens.size() == max_len) {
      done.push_back(std::move(h));
      return;
    }
    const auto lp = score(h.tokens);
    for (TokenId t = 0; t < vocab; ++t) {
      if (lp[t] == -std::numeric_limits<double>::infinity()) continue;
      Hypothesis n{h.tokens, h.logprob + lp[t], false};
      if (t == eos) {
        n.finished = true;
        done.push_back(std::move(n));
      } else {
        n.tokens.push_back(t);
        walk(std::move(n));
      }
    }
  };
  walk(Hypothesis{});
  std::stable_sort(done.begin(), done.end(), [](const Hypothesis& a, const Hypothesis& b) { return a.normalized() > b.normalized(); });
  return done;
}

/// Input bundle for decoding one example.
struct DecodeInput {
  std::vector<TokenId> source;
  SubGraph graph;
  std::vector<TokenId> node_tokens;
};

/// Scorer reading hidden row N + t for generation step t.
template <class T>
Scorer model_scorer(GrfModel<T>& m, const DecodeInput& in) {
  return [&m, &in](const std::vector<TokenId>& prefix) {
    ad::Tape<T> tape;
    auto seq = build_sequence(in.source, prefix, m.config.max_len);
    auto out = forward_steps(tape, m, seq, in.graph, in.node_tokens, in.source.size() + prefix.size(), 1);
    const auto& p = out.probs.value();
    std::vector<double> lp(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) lp[i] = std::log(static_cast<double>(p[i]));
    return lp;
  };
}

/// Longest output that still fits the model's position table.
template <class T>
std::size_t decode_cap(const GrfModel<T>& m, const DecodeInput& in, std::size_t max_len) {
  const std::size_t room = m.config.max_len > in.source.size() ? m.config.max_len - in.source.size() : 0;
  return std::min(max_len, room);
}

template <class T>
std::vector<TokenId> decode_greedy(GrfModel<T>& m, const DecodeInput& in, std::size_t max_len) {
  return greedy_search(model_scorer(m, in), decode_cap(m, in, max_len));
}

template <class T>
std::vector<Hypothesis> decode_beam(GrfModel<T>& m, const DecodeInput& in, std::size_t beam, std::size_t max_len) {
  return beam_search(model_scorer(m, in), beam, decode_cap(m, in, max_len));
}

struct TraceStep {
  TokenId token = 0;  // greedy choice at this step
  double gate = 0.0;
  std::vector<TracedPath> paths;
};

/// Greedy decode recording the gate value and top-k flow paths per step.
template <class T>
std::vector<TraceStep> trace_greedy(GrfModel<T>& m, const DecodeInput& in, std::size_t max_len, std::size_t top_k) {
  std::vector<TraceStep> steps;
  std::vector<TokenId> prefix;
  const std::size_t cap = decode_cap(m, in, max_len);
  while (prefix.size() < cap) {
    ad::Tape<T> tape;
    auto seq = build_sequence(in.source, prefix, m.config.max_len);
    auto out = forward_steps(tape, m, seq, in.graph, in.node_tokens, in.source.size() + prefix.size(), 1);
    TraceStep st;
    st.gate = static_cast<double>(out.gate.item());
    const auto& p = out.probs.value().data;
    st.token = static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin());
    if (out.has_relevance) {
      const auto& r = out.relevance.value().data;
      auto flow = propagate<T>(out.plan, std::span<const T>(r.data(), r.size()), m.flow);
      if (m.flow.aggregator == Aggregator::Max) st.paths = trace_paths(flow, in.graph, top_k);
    }
    steps.push_back(std::move(st));
    if (steps.back().token == Vocab::kEos) break;
    prefix.push_back(steps.back().token);
  }
  return steps;
}

}  // namespace grf
