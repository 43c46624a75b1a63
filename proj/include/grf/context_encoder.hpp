#pragma once

// Causal transformer language model over s = (x_1..x_N, [bos], y_1..y_M).
// Pre-norm residual blocks (masked multi-head self-attention, GELU MLP), learned
// positions numbered continuously across source and target.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "grf/numerics.hpp"
#include "grf/text.hpp"

namespace grf {

struct Sequence {
  std::vector<TokenId> tokens;
  std::size_t source_length = 0;  // N; [bos] sits at index N
};

/// (x, [bos], y). Fails with Overflow beyond max_len.
inline Sequence build_sequence(const std::vector<TokenId>& x, const std::vector<TokenId>& y, std::size_t max_len) {
  if (x.empty()) throw Error(ErrorCode::Format, "build_sequence: empty source");
  Sequence s;
  s.source_length = x.size();
  s.tokens = x;
  s.tokens.push_back(Vocab::kBos);
  s.tokens.insert(s.tokens.end(), y.begin(), y.end());
  if (s.tokens.size() > max_len)
    throw Error(ErrorCode::Overflow, "build_sequence: length " + std::to_string(s.tokens.size()) +
                                         " exceeds max_len " + std::to_string(max_len));
  return s;
}

template <class T>
struct TransformerBlock {
  ad::Parameter<T> ln1_gain, ln1_bias, wq, wk, wv, wo, bo, ln2_gain, ln2_bias, w1, b1, w2, b2;

  template <class F>
  void for_each(F&& f) {
    for (auto* p : {&ln1_gain, &ln1_bias, &wq, &wk, &wv, &wo, &bo, &ln2_gain, &ln2_bias, &w1, &b1, &w2, &b2}) f(*p);
  }
};

struct ContextEncoderShape {
  std::size_t vocab = 0;
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t max_len = 128;
  bool tie_embeddings = false;
};

template <class T>
struct ContextEncoderParams {
  ContextEncoderShape shape;
  ad::Parameter<T> token_embedding;     // [V, d]
  ad::Parameter<T> position_embedding;  // [max_len, d]
  std::vector<TransformerBlock<T>> blocks;
  ad::Parameter<T> lnf_gain, lnf_bias;
  ad::Parameter<T> w_lm;  // [d, V]; unused when tied
  ad::Parameter<T> b_lm;  // [V]

  static ContextEncoderParams init(const ContextEncoderShape& s, ad::Rng& rng) {
    if (s.heads == 0 || s.dim % s.heads != 0)
      throw Error(ErrorCode::Config, "context encoder: dim " + std::to_string(s.dim) + " not divisible by heads " +
                                         std::to_string(s.heads));
    ContextEncoderParams p;
    p.shape = s;
    const std::size_t d = s.dim;
    p.token_embedding = {"context.token_embedding", ad::normal_tensor<T>({s.vocab, d}, 0.1, rng)};
    p.position_embedding = {"context.position_embedding", ad::normal_tensor<T>({s.max_len, d}, 0.1, rng)};
    auto ones = [&](const std::string& n, std::size_t len) { return ad::Parameter<T>(n, ad::Tensor<T>({len}, T(1))); };
    auto zeros = [&](const std::string& n, std::size_t len) { return ad::Parameter<T>(n, ad::Tensor<T>({len}, T(0))); };
    for (std::size_t l = 0; l < s.layers; ++l) {
      const std::string b = "context.block" + std::to_string(l) + ".";
      TransformerBlock<T> blk;
      blk.ln1_gain = ones(b + "ln1_gain", d);
      blk.ln1_bias = zeros(b + "ln1_bias", d);
      blk.wq = {b + "wq", ad::xavier_tensor<T>(d, d, rng)};
      blk.wk = {b + "wk", ad::xavier_tensor<T>(d, d, rng)};
      blk.wv = {b + "wv", ad::xavier_tensor<T>(d, d, rng)};
      blk.wo = {b + "wo", ad::xavier_tensor<T>(d, d, rng)};
      blk.bo = zeros(b + "bo", d);
      blk.ln2_gain = ones(b + "ln2_gain", d);
      blk.ln2_bias = zeros(b + "ln2_bias", d);
      blk.w1 = {b + "w1", ad::xavier_tensor<T>(d, 4 * d, rng)};
      blk.b1 = zeros(b + "b1", 4 * d);
      blk.w2 = {b + "w2", ad::xavier_tensor<T>(4 * d, d, rng)};
      blk.b2 = zeros(b + "b2", d);
      p.blocks.push_back(std::move(blk));
    }
    p.lnf_gain = ones("context.lnf_gain", d);
    p.lnf_bias = zeros("context.lnf_bias", d);
    if (!s.tie_embeddings) p.w_lm = {"context.w_lm", ad::xavier_tensor<T>(d, s.vocab, rng)};
    p.b_lm = zeros("context.b_lm", s.vocab);
    return p;
  }

  template <class F>
  void for_each(F&& f) {
    f(token_embedding);
    f(position_embedding);
    for (auto& b : blocks) b.for_each(f);
    f(lnf_gain);
    f(lnf_bias);
    if (!shape.tie_embeddings) f(w_lm);
    f(b_lm);
  }
};

template <class T>
struct ContextOutput {
  ad::Var<T> hidden;  // [T, d], final-layer states after the last layer norm
  ad::Var<T> logits;  // [T, V]; row t scores s_{t+1}
};

/// Causal forward pass. [pad] keys are masked out of attention.
template <class T>
ContextOutput<T> context_forward(ad::Tape<T>& tape, ContextEncoderParams<T>& p, const std::vector<TokenId>& tokens) {
  const auto& s = p.shape;
  const std::size_t n = tokens.size(), d = s.dim, dh = d / s.heads;
  if (n == 0) throw Error(ErrorCode::Format, "context encoder: empty sequence");
  if (n > s.max_len)
    throw Error(ErrorCode::Overflow, "context encoder: length " + std::to_string(n) + " exceeds max_len " + std::to_string(s.max_len));
  for (auto t : tokens)
    if (t >= s.vocab) throw Error(ErrorCode::InvalidId, "context encoder: token id " + std::to_string(t) + " out of range");

  std::vector<std::size_t> ids(tokens.begin(), tokens.end()), pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = i;
  auto emb = tape.param(p.token_embedding);
  auto h = ad::add(ad::gather_rows(emb, ids), ad::gather_rows(tape.param(p.position_embedding), pos));

  ad::Tensor<T> mask({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j > i || (tokens[j] == Vocab::kPad && j != i)) mask(i, j) = -std::numeric_limits<T>::infinity();
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));

  for (auto& blk : p.blocks) {
    auto x = ad::layer_norm_rows(h, tape.param(blk.ln1_gain), tape.param(blk.ln1_bias));
    auto q = ad::matmul(x, tape.param(blk.wq));
    auto k = ad::matmul(x, tape.param(blk.wk));
    auto v = ad::matmul(x, tape.param(blk.wv));
    std::vector<ad::Var<T>> heads;
    for (std::size_t hd = 0; hd < s.heads; ++hd) {
      auto qh = ad::slice_cols(q, hd * dh, dh);
      auto kh = ad::slice_cols(k, hd * dh, dh);
      auto vh = ad::slice_cols(v, hd * dh, dh);
      auto att = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt), &mask);
      heads.push_back(ad::matmul(att, vh));
    }
    auto merged = heads.size() == 1 ? heads[0] : ad::concat_cols<T>(std::span<const ad::Var<T>>(heads));
    h = ad::add(h, ad::add_row(ad::matmul(merged, tape.param(blk.wo)), tape.param(blk.bo)));
    auto x2 = ad::layer_norm_rows(h, tape.param(blk.ln2_gain), tape.param(blk.ln2_bias));
    auto ff = ad::gelu(ad::add_row(ad::matmul(x2, tape.param(blk.w1)), tape.param(blk.b1)));
    h = ad::add(h, ad::add_row(ad::matmul(ff, tape.param(blk.w2)), tape.param(blk.b2)));
  }
  auto hidden = ad::layer_norm_rows(h, tape.param(p.lnf_gain), tape.param(p.lnf_bias));
  auto logits_raw = s.tie_embeddings ? ad::matmul_nt(hidden, emb) : ad::matmul(hidden, tape.param(p.w_lm));
  return {hidden, ad::add_row(logits_raw, tape.param(p.b_lm))};
}

}  // namespace grf
