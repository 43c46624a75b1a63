#pragma once

// The full generator: context LM + graph encoder + reasoning flow + gated
// mixture of concept-copy and vocabulary distributions.

#include <string>
#include <vector>

#include "grf/context_encoder.hpp"
#include "grf/graph_encoder.hpp"
#include "grf/reasoning_flow.hpp"

namespace grf {

/// Ablations: NoReasoningFlow replaces the node distribution by a uniform one
/// over reached nodes; NoGraphEncoder feeds raw initial embeddings to the flow.
enum class Variant { Full, NoReasoningFlow, NoGraphEncoder };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full:
      return "full";
    case Variant::NoReasoningFlow:
      return "no_flow";
    case Variant::NoGraphEncoder:
      return "no_graph_encoder";
  }
  return "full";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "no_flow") return Variant::NoReasoningFlow;
  if (s == "no_graph_encoder") return Variant::NoGraphEncoder;
  throw Error(ErrorCode::Config, "model: unknown variant '" + s + "' (full | no_flow | no_graph_encoder)");
}

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t max_len = 128;
  std::size_t d_graph = 64;
  std::size_t graph_layers = 2;
  bool tie_embeddings = false;
  Variant variant = Variant::Full;

  void validate() const {
    if (d_model == 0 || d_graph == 0 || max_len == 0) throw Error(ErrorCode::Config, "model: sizes must be positive");
    if (heads == 0 || d_model % heads != 0) throw Error(ErrorCode::Config, "model: d_model must be divisible by heads");
  }
};

/// One training/evaluation instance with its grounding and supervision.
struct Example {
  std::vector<TokenId> source;
  std::vector<TokenId> target;  // gold tokens followed by [eos]
  SubGraph graph;
  std::vector<TokenId> node_tokens;  // vocab id of each node's surface
  std::vector<std::uint8_t> gate_labels;  // per target position
  std::vector<std::uint8_t> weak_labels;  // per subgraph edge
};

template <class T>
struct GrfModel {
  ModelConfig config;
  FlowConfig flow;
  Vocab vocab;
  RelationVocab relations;
  ContextEncoderParams<T> context;
  GraphEncoderParams<T> graph;
  ad::Parameter<T> w_sim;   // [3 * d_graph, d_model]
  ad::Parameter<T> w_gate;  // [1, d_model]

  static GrfModel init(const ModelConfig& cfg, const FlowConfig& flow, Vocab vocab, RelationVocab relations,
                       std::uint64_t seed) {
    cfg.validate();
    flow.validate();
    GrfModel m;
    m.config = cfg;
    m.flow = flow;
    m.vocab = std::move(vocab);
    m.relations = std::move(relations);
    ad::Rng rng(seed);
    m.context = ContextEncoderParams<T>::init(
        {m.vocab.size(), cfg.d_model, cfg.heads, cfg.layers, cfg.max_len, cfg.tie_embeddings}, rng);
    m.graph = GraphEncoderParams<T>::init(cfg.d_graph, cfg.graph_layers, m.relations.size(), cfg.d_model, rng);
    m.w_sim = {"flow.w_sim", ad::normal_tensor<T>({3 * cfg.d_graph, cfg.d_model}, 0.1, rng)};
    m.w_gate = {"gate.w_gate", ad::normal_tensor<T>({1, cfg.d_model}, 0.1, rng)};
    return m;
  }

  template <class F>
  void for_each(F&& f) {
    context.for_each(f);
    graph.for_each(f);
    f(w_sim);
    f(w_gate);
  }

  std::vector<ad::Parameter<T>*> parameters() {
    std::vector<ad::Parameter<T>*> out;
    for_each([&](ad::Parameter<T>& p) { out.push_back(&p); });
    return out;
  }

  void zero_grad() {
    for_each([](ad::Parameter<T>& p) { p.zero_grad(); });
  }
};

/// Gated mixture: probs = g * scatter(node_dist -> tokens) + (1 - g) * softmax(logits).
/// Shapes: logits [S, V], node_dist [S, nodes], gate [S, 1].
template <class T>
ad::Var<T> mix(const ad::Var<T>& vocab_logits, const ad::Var<T>& node_dist, const std::vector<TokenId>& node_tokens,
               const ad::Var<T>& gate) {
  const std::size_t V = vocab_logits.shape().at(1);
  auto vocab_probs = ad::softmax_rows(vocab_logits);
  auto concept_probs = ad::scatter_cols(node_dist, std::vector<std::size_t>(node_tokens.begin(), node_tokens.end()), V);
  return ad::add(ad::scale_rows(concept_probs, gate), ad::scale_rows(vocab_probs, ad::affine(gate, T(-1), T(1))));
}

template <class T>
struct StepOutputs {
  ad::Var<T> probs;      // [S, V] mixed distribution
  ad::Var<T> gate;       // [S, 1]
  ad::Var<T> relevance;  // [S, E]; valid only when has_relevance
  ad::Var<T> node_dist;  // [S, nodes]; valid only when has_graph
  ad::Var<T> scores;     // [S, nodes] flow scores; valid only when has_relevance
  bool has_graph = false;
  bool has_relevance = false;
  FlowPlan plan;
};

/// Runs the model on `seq` and produces output distributions for hidden rows
/// `rows` (row t predicts token t + 1). An empty subgraph yields the plain LM
/// distribution with the gate still reported.
template <class T>
StepOutputs<T> forward_steps(ad::Tape<T>& tape, GrfModel<T>& m, const Sequence& seq, const SubGraph& g,
                             const std::vector<TokenId>& node_tokens, std::size_t first_row, std::size_t num_rows) {
  if (node_tokens.size() != g.size())
    throw Error(ErrorCode::Shape, "forward: node_tokens has " + std::to_string(node_tokens.size()) + " entries for " +
                                      std::to_string(g.size()) + " nodes");
  auto ctx = context_forward(tape, m.context, seq.tokens);
  auto hidden = ad::slice_rows(ctx.hidden, first_row, num_rows);
  auto logits = ad::slice_rows(ctx.logits, first_row, num_rows);
  StepOutputs<T> out;
  out.gate = ad::sigmoid(ad::matmul_nt(hidden, tape.param(m.w_gate)));
  if (g.size() == 0) {
    out.probs = ad::softmax_rows(logits);
    return out;
  }
  out.has_graph = true;
  out.plan = make_flow_plan(g, m.flow.hops);
  const std::size_t nc = m.relations.num_canonical();

  if (m.config.variant == Variant::NoReasoningFlow) {
    ad::Tensor<T> uniform({num_rows, g.size()});
    std::size_t reached = 0;
    for (std::size_t v = 0; v < g.size(); ++v) reached += out.plan.reached(v);
    for (std::size_t s = 0; s < num_rows; ++s)
      for (std::size_t v = 0; v < g.size(); ++v) uniform(s, v) = out.plan.reached(v) ? T(1) / static_cast<T>(reached) : T(0);
    out.node_dist = tape.constant(std::move(uniform));
  } else {
    std::vector<std::size_t> ids(node_tokens.begin(), node_tokens.end());
    auto node_init = ad::gather_rows(tape.param(m.context.token_embedding), ids);
    if (m.graph.has_projection) node_init = ad::matmul(node_init, tape.param(m.graph.projection));
    auto rel_init = tape.param(m.graph.relation_embedding);
    GraphEncoding<T> enc{node_init, rel_init};
    if (m.config.variant == Variant::Full) enc = encode(g, node_init, rel_init, m.graph, nc);
    out.relevance = relevance_matrix(enc.nodes, enc.relations, g, nc, tape.param(m.w_sim), hidden);
    out.has_relevance = true;
    out.scores = flow_scores(out.relevance, out.plan, m.flow);
    out.node_dist = node_distribution(out.scores, out.plan);
  }
  out.probs = mix(logits, out.node_dist, node_tokens, out.gate);
  return out;
}

}  // namespace grf
