#pragma once

// Dynamic multi-hop evidence propagation over a grounded subgraph.
//
// At every decoding step each edge (u, r, v) gets a context-dependent relevance
// R(u,r,v) = sigmoid([h_u; h_r; h_v]^T W_sim h_t). Node scores then flow outward
// from the source concepts one hop at a time:
//
//   ns(source) = 1
//   ns(v)      = f over visited in-neighbours (u, r) of  gamma * ns(u) + R(u, r, v)
//
// with f = max or mean. A node is scored once, at the first hop where it has a
// visited in-neighbour; nodes not reached within `hops` stay UNREACHED and get
// zero probability in the node distribution (softmax over reached nodes only).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "grf/grounding.hpp"
#include "grf/numerics.hpp"

namespace grf {

enum class Aggregator { Max, Mean };

inline std::string to_string(Aggregator a) { return a == Aggregator::Max ? "max" : "mean"; }

inline Aggregator aggregator_from_string(const std::string& s) {
  if (s == "max") return Aggregator::Max;
  if (s == "mean") return Aggregator::Mean;
  throw Error(ErrorCode::Config, "flow: aggregator must be 'max' or 'mean', got '" + s + "'");
}

struct FlowConfig {
  double gamma = 0.5;
  Aggregator aggregator = Aggregator::Max;
  std::size_t hops = 2;

  void validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error(ErrorCode::Config, "flow: gamma must lie in [0, 1]");
    if (hops < 1) throw Error(ErrorCode::Config, "flow: hops must be >= 1");
  }
};

inline constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

/// Structure of the propagation, independent of relevance values: the level at
/// which each node is visited and the in-edges it aggregates over.
struct FlowPlan {
  std::vector<std::size_t> level;                 // kUnreached when not visited
  std::vector<std::vector<std::size_t>> in_edges;  // visited in-edges per node, ascending edge index
  std::vector<std::size_t> order;                  // non-source reached nodes by (level, index)
  std::vector<std::size_t> heads;                  // edge -> head node
  std::size_t num_edges = 0;

  std::size_t num_nodes() const { return level.size(); }
  bool reached(std::size_t v) const { return level[v] != kUnreached; }
};

inline FlowPlan make_flow_plan(const SubGraph& g, std::size_t hops) {
  FlowPlan plan;
  const std::size_t n = g.size();
  plan.level.assign(n, kUnreached);
  plan.in_edges.assign(n, {});
  plan.num_edges = g.edges.size();
  for (const auto& e : g.edges) plan.heads.push_back(e.head);
  bool any_source = false;
  for (std::size_t i = 0; i < n; ++i)
    if (g.nodes[i].is_source) {
      plan.level[i] = 0;
      any_source = true;
    }
  if (!any_source && n > 0) throw Error(ErrorCode::EmptyGrounding, "propagate: subgraph has no source node");

  std::vector<std::vector<std::size_t>> incoming(n);
  for (std::size_t k = 0; k < g.edges.size(); ++k) incoming[g.edges[k].tail].push_back(k);

  for (std::size_t hop = 1; hop <= hops; ++hop) {
    std::vector<std::size_t> fresh;
    for (std::size_t v = 0; v < n; ++v) {
      if (plan.reached(v)) continue;
      for (auto k : incoming[v]) {
        const auto u = g.edges[k].head;
        if (plan.level[u] != kUnreached && plan.level[u] < hop) plan.in_edges[v].push_back(k);
      }
      if (!plan.in_edges[v].empty()) fresh.push_back(v);
    }
    if (fresh.empty()) break;
    for (auto v : fresh) {
      plan.level[v] = hop;
      plan.order.push_back(v);
    }
  }
  return plan;
}

template <class T>
struct FlowState {
  std::vector<T> scores;                            // ns(v); 0 for unreached nodes
  std::vector<std::size_t> level;                   // 0 for sources, kUnreached if never visited
  std::vector<std::optional<std::size_t>> backptr;  // maximising in-edge (max mode only)
  Aggregator aggregator = Aggregator::Max;

  bool reached(std::size_t v) const { return level[v] != kUnreached; }
};

/// Propagates one step's relevance vector (one value per subgraph edge).
template <class T>
FlowState<T> propagate(const FlowPlan& plan, std::span<const T> relevance, const FlowConfig& cfg) {
  if (relevance.size() != plan.num_edges)
    throw Error(ErrorCode::Shape, "propagate: " + std::to_string(relevance.size()) + " relevance values for " +
                                      std::to_string(plan.num_edges) + " edges");
  const T gamma = static_cast<T>(cfg.gamma);
  FlowState<T> st;
  st.aggregator = cfg.aggregator;
  st.level = plan.level;
  st.scores.assign(plan.num_nodes(), T(0));
  st.backptr.assign(plan.num_nodes(), std::nullopt);
  for (std::size_t v = 0; v < plan.num_nodes(); ++v)
    if (plan.level[v] == 0) st.scores[v] = T(1);
  for (auto v : plan.order) {
    const auto& ins = plan.in_edges[v];
    if (cfg.aggregator == Aggregator::Max) {
      std::size_t best = ins.front();
      T best_val = gamma * st.scores[plan.heads[best]] + relevance[best];
      for (std::size_t i = 1; i < ins.size(); ++i) {
        const T val = gamma * st.scores[plan.heads[ins[i]]] + relevance[ins[i]];
        if (val > best_val) {
          best_val = val;
          best = ins[i];
        }
      }
      st.scores[v] = best_val;
      st.backptr[v] = best;
    } else {
      T acc = 0;
      for (auto k : ins) acc += gamma * st.scores[plan.heads[k]] + relevance[k];
      st.scores[v] = acc / static_cast<T>(ins.size());
    }
  }
  return st;
}

template <class T>
FlowState<T> propagate(const SubGraph& g, std::span<const T> relevance, const FlowConfig& cfg) {
  cfg.validate();
  return propagate<T>(make_flow_plan(g, cfg.hops), relevance, cfg);
}

/// Softmax over reached nodes' scores; unreached nodes get exactly 0.
template <class T>
std::vector<T> node_distribution(const FlowState<T>& st) {
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t v = 0; v < st.scores.size(); ++v)
    if (st.reached(v)) mx = std::max(mx, st.scores[v]);
  if (!std::isfinite(mx)) throw Error(ErrorCode::EmptyGrounding, "node_distribution: no reached node");
  std::vector<T> p(st.scores.size(), T(0));
  T z = 0;
  for (std::size_t v = 0; v < p.size(); ++v)
    if (st.reached(v)) z += (p[v] = std::exp(st.scores[v] - mx));
  for (auto& x : p) x /= z;
  return p;
}

/// Relevance of a single triple from plain vectors (h_u, h_r, h_v of width dg,
/// h_t of width d, W_sim row-major [3*dg, d]).
template <class T>
T triple_relevance(std::span<const T> h_u, std::span<const T> h_r, std::span<const T> h_v, std::span<const T> h_t,
                   const ad::Tensor<T>& w_sim) {
  const std::size_t dg = h_u.size(), d = h_t.size();
  if (h_r.size() != dg || h_v.size() != dg || w_sim.shape != ad::Shape{3 * dg, d})
    throw Error(ErrorCode::Shape, "triple_relevance: dimension mismatch with W_sim " + ad::shape_str(w_sim.shape));
  T s = 0;
  for (std::size_t part = 0; part < 3; ++part) {
    const auto& h = part == 0 ? h_u : part == 1 ? h_r : h_v;
    for (std::size_t i = 0; i < dg; ++i) {
      T row = 0;
      for (std::size_t j = 0; j < d; ++j) row += w_sim(part * dg + i, j) * h_t[j];
      s += h[i] * row;
    }
  }
  return ad::sigmoid_value(s);
}

/// R for every (step, edge): sigmoid(H_ctx W_sim^T H_trip^T), shape [steps, edges].
template <class T>
ad::Var<T> relevance_matrix(const ad::Var<T>& node_states, const ad::Var<T>& relation_states, const SubGraph& g,
                            std::size_t num_canonical, const ad::Var<T>& w_sim, const ad::Var<T>& context) {
  std::vector<std::size_t> heads, rels, tails;
  for (const auto& e : g.edges) {
    heads.push_back(e.head);
    rels.push_back(e.relation.flat(num_canonical));
    tails.push_back(e.tail);
  }
  auto trip = ad::concat_cols<T>({ad::gather_rows(node_states, heads), ad::gather_rows(relation_states, rels),
                                  ad::gather_rows(node_states, tails)});
  return ad::sigmoid(ad::matmul_nt(ad::matmul_nt(context, w_sim), trip));
}

/// Differentiable propagation for all steps: relevance [steps, edges] ->
/// scores [steps, nodes] (0 at unreached nodes). Max routes the gradient through
/// the recorded back-pointer, mean splits it evenly.
template <class T>
ad::Var<T> flow_scores(const ad::Var<T>& relevance, const FlowPlan& plan, const FlowConfig& cfg) {
  const auto& rv = relevance.value();
  const std::size_t S = rv.rows();
  const std::size_t E = plan.num_edges, V = plan.num_nodes();
  if (rv.shape.size() != 2 || rv.shape[1] != E) ad::shape_error("flow_scores", rv.shape, ad::Shape{S, E});
  ad::Tensor<T> ns({S, V});
  std::vector<std::optional<std::size_t>> backptr(S * V);
  for (std::size_t s = 0; s < S; ++s) {
    auto st = propagate<T>(plan, std::span<const T>(&rv.data[s * E], E), cfg);
    std::copy(st.scores.begin(), st.scores.end(), &ns[s * V]);
    std::copy(st.backptr.begin(), st.backptr.end(), backptr.begin() + static_cast<std::ptrdiff_t>(s * V));
  }
  const T gamma = static_cast<T>(cfg.gamma);
  const std::size_t ir = relevance.id();
  return relevance.tape().record(
      std::move(ns), {relevance},
      [ir, S, E, V, gamma, agg = cfg.aggregator, plan, backptr = std::move(backptr)](ad::Tape<T>& tp, std::size_t self) {
        auto go = tp.grad(self);
        auto gr = tp.grad(ir);
        std::vector<T> gns(V);
        for (std::size_t s = 0; s < S; ++s) {
          std::copy_n(&go[s * V], V, gns.begin());
          for (auto it = plan.order.rbegin(); it != plan.order.rend(); ++it) {
            const auto v = *it;
            const T g = gns[v];
            if (g == T(0)) continue;
            if (agg == Aggregator::Max) {
              const auto k = *backptr[s * V + v];
              gr[s * E + k] += g;
              gns[plan.heads[k]] += gamma * g;
            } else {
              const auto& ins = plan.in_edges[v];
              const T share = g / static_cast<T>(ins.size());
              for (auto k : ins) {
                gr[s * E + k] += share;
                gns[plan.heads[k]] += gamma * share;
              }
            }
          }
        }
      });
}

/// Row-wise softmax over reached nodes only.
template <class T>
ad::Var<T> node_distribution(const ad::Var<T>& scores, const FlowPlan& plan) {
  const auto& sv = scores.value();
  ad::Tensor<T> mask(sv.shape);
  const std::size_t S = sv.rows(), V = sv.cols();
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t v = 0; v < V; ++v)
      if (!plan.reached(v)) mask[s * V + v] = -std::numeric_limits<T>::infinity();
  return ad::softmax_rows(scores, &mask);
}

struct TracedPath {
  std::size_t node = 0;
  double score = 0.0;
  std::vector<std::size_t> edges;  // source -> node, in order
};

/// Top-k reached nodes by score (ties by node index) with their argmax paths.
template <class T>
std::vector<TracedPath> trace_paths(const FlowState<T>& st, const SubGraph& g, std::size_t top_k) {
  if (st.aggregator != Aggregator::Max)
    throw Error(ErrorCode::UnsupportedTrace, "trace_paths: back-pointers exist only for the max aggregator (UnsupportedTrace)");
  std::vector<std::size_t> nodes;
  for (std::size_t v = 0; v < st.scores.size(); ++v)
    if (st.reached(v)) nodes.push_back(v);
  std::stable_sort(nodes.begin(), nodes.end(), [&](auto a, auto b) { return st.scores[a] > st.scores[b]; });
  if (nodes.size() > top_k) nodes.resize(top_k);
  std::vector<TracedPath> out;
  for (auto v : nodes) {
    TracedPath p{v, static_cast<double>(st.scores[v]), {}};
    for (std::size_t cur = v; st.level[cur] != 0;) {
      const auto k = st.backptr[cur].value();
      p.edges.push_back(k);
      cur = g.edges[k].head;
    }
    std::reverse(p.edges.begin(), p.edges.end());
    out.push_back(std::move(p));
  }
  return out;
}

/// `concept<TAB>score<TAB>s --r1--> u --r2--> v`
inline std::string format_trace(const TracedPath& p, const SubGraph& g, const KnowledgeGraph& kg) {
  std::ostringstream out;
  out << kg.surface(g.nodes[p.node].concept_id) << '\t' << p.score << '\t';
  if (p.edges.empty()) {
    out << kg.surface(g.nodes[p.node].concept_id);
  } else {
    out << kg.surface(g.nodes[g.edges[p.edges.front()].head].concept_id);
    for (auto k : p.edges)
      out << " --" << kg.relations().name(g.edges[k].relation) << "--> " << kg.surface(g.nodes[g.edges[k].tail].concept_id);
  }
  return out.str();
}

}  // namespace grf
