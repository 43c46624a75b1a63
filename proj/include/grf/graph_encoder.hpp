#pragma once

// Static multi-relational graph encoder. Each layer composes a neighbour with
// its connecting relation as phi(h_u, h_r) = h_u - h_r, averages over v's
// incoming (u, r) pairs, and adds a self term:
//
//   o_v    = mean_{(u,r) -> v} phi(h_u, h_r) W_N
//   h_v'   = ReLU(o_v + h_v W_S)
//   h_r'   = h_r W_R
//
// Row-vector convention: states are rows, weights multiply on the right.

#include <vector>

#include "grf/grounding.hpp"
#include "grf/numerics.hpp"

namespace grf {

template <class T>
struct GraphEncoderParams {
  std::size_t dim = 0;
  ad::Parameter<T> relation_embedding;  // [2 * num_canonical, dim]
  std::vector<ad::Parameter<T>> w_neighbor, w_self, w_relation;
  bool has_projection = false;
  ad::Parameter<T> projection;  // [d_word, dim] when d_word != dim

  static GraphEncoderParams init(std::size_t dim, std::size_t layers, std::size_t num_relations, std::size_t d_word,
                                 ad::Rng& rng) {
    GraphEncoderParams p;
    p.dim = dim;
    p.relation_embedding = {"graph.relation_embedding", ad::normal_tensor<T>({num_relations, dim}, 0.5, rng)};
    for (std::size_t l = 0; l < layers; ++l) {
      const auto s = std::to_string(l);
      p.w_neighbor.emplace_back("graph.layer" + s + ".w_neighbor", ad::xavier_tensor<T>(dim, dim, rng));
      p.w_self.emplace_back("graph.layer" + s + ".w_self", ad::xavier_tensor<T>(dim, dim, rng));
      p.w_relation.emplace_back("graph.layer" + s + ".w_relation", ad::xavier_tensor<T>(dim, dim, rng));
    }
    if (d_word != dim) {
      p.has_projection = true;
      p.projection = {"graph.projection", ad::xavier_tensor<T>(d_word, dim, rng)};
    }
    return p;
  }

  std::size_t layers() const { return w_neighbor.size(); }

  template <class F>
  void for_each(F&& f) {
    f(relation_embedding);
    for (std::size_t l = 0; l < layers(); ++l) {
      f(w_neighbor[l]);
      f(w_self[l]);
      f(w_relation[l]);
    }
    if (has_projection) f(projection);
  }
};

template <class T>
struct GraphEncoding {
  ad::Var<T> nodes;      // [|V|, dim]
  ad::Var<T> relations;  // [2 * num_canonical, dim]
};

/// phi(h_u, h_r) = h_u - h_r.
template <class T>
ad::Var<T> compose(const ad::Var<T>& h_u, const ad::Var<T>& h_r) {
  return ad::sub(h_u, h_r);
}

/// Runs all layers from initial node and relation states.
template <class T>
GraphEncoding<T> encode(const SubGraph& g, const ad::Var<T>& node_init, const ad::Var<T>& relation_init,
                        GraphEncoderParams<T>& params, std::size_t num_canonical) {
  if (g.size() == 0) throw Error(ErrorCode::EmptyGrounding, "graph encoder: empty subgraph");
  if (node_init.shape() != ad::Shape{g.size(), params.dim})
    ad::shape_error("graph encoder(node_init)", node_init.shape(), ad::Shape{g.size(), params.dim});
  auto& tape = node_init.tape();
  std::vector<std::size_t> heads, rels, tails;
  for (const auto& e : g.edges) {
    heads.push_back(e.head);
    rels.push_back(e.relation.flat(num_canonical));
    tails.push_back(e.tail);
  }
  ad::Var<T> h = node_init, hr = relation_init;
  for (std::size_t l = 0; l < params.layers(); ++l) {
    auto self = ad::matmul(h, tape.param(params.w_self[l]));
    ad::Var<T> pre = self;
    if (!g.edges.empty()) {
      auto phi = compose(ad::gather_rows(h, heads), ad::gather_rows(hr, rels));
      auto msg = ad::matmul(phi, tape.param(params.w_neighbor[l]));
      pre = ad::add(ad::segment_mean_rows(msg, tails, g.size()), self);
    }
    h = ad::relu(pre);
    hr = ad::matmul(hr, tape.param(params.w_relation[l]));
  }
  return {h, hr};
}

}  // namespace grf
