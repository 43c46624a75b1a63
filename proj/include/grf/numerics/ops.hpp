#pragma once

// Differentiable operations over Tape/Var. Every op checks shapes up front and
// throws ErrorCode::Shape naming the op and both shapes on mismatch.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "grf/numerics/tape.hpp"

namespace grf::ad {

namespace detail {

template <class T>
void require_same(const char* op, const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

template <class T>
void require_rank2(const char* op, const Var<T>& a) {
  if (a.shape().size() != 2) throw Error(ErrorCode::Shape, std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

/// Elementwise unary op given f(x) and df/dx expressed through (x, y).
template <class T, class F, class D>
Var<T> unary(const Var<T>& a, F f, D df) {
  Tape<T>& t = a.tape();
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, df](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    const auto& xv = tp.value(ia);
    const auto& yv = tp.value(self);
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * df(xv[i], yv[i]);
  });
}

}  // namespace detail

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same("add", a, b);
  Tensor<T> y = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(y), {a, b}, [ia, ib](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    for (std::size_t id : {ia, ib}) {
      if (!tp.requires_grad(id)) continue;
      auto g = tp.grad(id);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same("sub", a, b);
  Tensor<T> y = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(y), {a, b}, [ia, ib](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    if (tp.requires_grad(ia)) {
      auto g = tp.grad(ia);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
    }
    if (tp.requires_grad(ib)) {
      auto g = tp.grad(ib);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] -= go[i];
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same("mul", a, b);
  Tensor<T> y = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(y), {a, b}, [ia, ib](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    const auto& av = tp.value(ia);
    const auto& bv2 = tp.value(ib);
    if (tp.requires_grad(ia)) {
      auto g = tp.grad(ia);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * bv2[i];
    }
    if (tp.requires_grad(ib)) {
      auto g = tp.grad(ib);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i] * av[i];
    }
  });
}

/// scale * a + shift, elementwise with constant coefficients.
template <class T>
Var<T> affine(const Var<T>& a, T scale, T shift = T(0)) {
  return detail::unary(a, [=](T x) { return scale * x + shift; }, [=](T, T) { return scale; });
}

template <class T>
Var<T> scale(const Var<T>& a, T c) {
  return affine(a, c, T(0));
}

/// a[r,c] + b[c] (or b[1,c]) broadcast over rows.
template <class T>
Var<T> add_row(const Var<T>& a, const Var<T>& b) {
  detail::require_rank2("add_row", a);
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  if (b.value().size() != C) shape_error("add_row", a.shape(), b.shape());
  Tensor<T> y = a.value();
  const auto& bv = b.value();
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) y(r, c) += bv[c];
  std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(y), {a, b}, [ia, ib, R, C](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    if (tp.requires_grad(ia)) {
      auto g = tp.grad(ia);
      for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
    }
    if (tp.requires_grad(ib)) {
      auto g = tp.grad(ib);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) g[c] += go[r * C + c];
    }
  });
}

/// a[r,c] * s[r] with s given as [r], [r,1] or [1,r].
template <class T>
Var<T> scale_rows(const Var<T>& a, const Var<T>& s) {
  detail::require_rank2("scale_rows", a);
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  if (s.value().size() != R) shape_error("scale_rows", a.shape(), s.shape());
  Tensor<T> y = a.value();
  const auto& sv = s.value();
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) y(r, c) *= sv[r];
  std::size_t ia = a.id(), is = s.id();
  return a.tape().record(std::move(y), {a, s}, [ia, is, R, C](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    const auto& av = tp.value(ia);
    const auto& sv2 = tp.value(is);
    if (tp.requires_grad(ia)) {
      auto g = tp.grad(ia);
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) g[r * C + c] += go[r * C + c] * sv2[r];
    }
    if (tp.requires_grad(is)) {
      auto g = tp.grad(is);
      for (std::size_t r = 0; r < R; ++r) {
        T acc = 0;
        for (std::size_t c = 0; c < C; ++c) acc += go[r * C + c] * av[r * C + c];
        g[r] += acc;
      }
    }
  });
}

/// [m,k] x [k,n] -> [m,n]
template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  detail::require_rank2("matmul", a);
  detail::require_rank2("matmul", b);
  const std::size_t M = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
  if (b.shape()[0] != K) shape_error("matmul", a.shape(), b.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor<T> y({M, N});
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t k = 0; k < K; ++k) {
      const T aik = av[i * K + k];
      if (aik == T(0)) continue;
      const T* brow = &bv[k * N];
      T* yrow = &y[i * N];
      for (std::size_t j = 0; j < N; ++j) yrow[j] += aik * brow[j];
    }
  std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(y), {a, b}, [ia, ib, M, K, N](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    const auto& av2 = tp.value(ia);
    const auto& bv2 = tp.value(ib);
    if (tp.requires_grad(ia)) {  // dA = dY B^T
      auto g = tp.grad(ia);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          T acc = 0;
          for (std::size_t j = 0; j < N; ++j) acc += go[i * N + j] * bv2[k * N + j];
          g[i * K + k] += acc;
        }
    }
    if (tp.requires_grad(ib)) {  // dB = A^T dY
      auto g = tp.grad(ib);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          const T aik = av2[i * K + k];
          if (aik == T(0)) continue;
          for (std::size_t j = 0; j < N; ++j) g[k * N + j] += aik * go[i * N + j];
        }
    }
  });
}

/// [m,k] x [n,k]^T -> [m,n]
template <class T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  detail::require_rank2("matmul_nt", a);
  detail::require_rank2("matmul_nt", b);
  const std::size_t M = a.shape()[0], K = a.shape()[1], N = b.shape()[0];
  if (b.shape()[1] != K) shape_error("matmul_nt", a.shape(), b.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor<T> y({M, N});
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      T acc = 0;
      for (std::size_t k = 0; k < K; ++k) acc += av[i * K + k] * bv[j * K + k];
      y[i * N + j] = acc;
    }
  std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(y), {a, b}, [ia, ib, M, K, N](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    const auto& av2 = tp.value(ia);
    const auto& bv2 = tp.value(ib);
    if (tp.requires_grad(ia)) {  // dA = dY B
      auto g = tp.grad(ia);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j) {
          const T gij = go[i * N + j];
          if (gij == T(0)) continue;
          for (std::size_t k = 0; k < K; ++k) g[i * K + k] += gij * bv2[j * K + k];
        }
    }
    if (tp.requires_grad(ib)) {  // dB = dY^T A
      auto g = tp.grad(ib);
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < N; ++j) {
          const T gij = go[i * N + j];
          if (gij == T(0)) continue;
          for (std::size_t k = 0; k < K; ++k) g[j * K + k] += gij * av2[i * K + k];
        }
    }
  });
}

template <class T>
Var<T> transpose(const Var<T>& a) {
  detail::require_rank2("transpose", a);
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  const auto& av = a.value();
  Tensor<T> y({C, R});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) y[c * R + r] = av[r * C + c];
  std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia, R, C](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    auto g = tp.grad(ia);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) g[r * C + c] += go[c * R + r];
  });
}

template <class T>
Var<T> relu(const Var<T>& a) {
  return detail::unary(a, [](T x) { return x > T(0) ? x : T(0); },
                       [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
T sigmoid_value(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  return detail::unary(a, [](T x) { return sigmoid_value(x); }, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> tanh(const Var<T>& a) {
  return detail::unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

/// GELU, tanh approximation.
template <class T>
Var<T> gelu(const Var<T>& a) {
  constexpr T k = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T c = T(0.044715);
  return detail::unary(
      a, [=](T x) { return T(0.5) * x * (T(1) + std::tanh(k * (x + c * x * x * x))); },
      [=](T x, T) {
        const T u = k * (x + c * x * x * x);
        const T th = std::tanh(u);
        const T du = k * (T(1) + T(3) * c * x * x);
        return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
      });
}

template <class T>
Var<T> exp(const Var<T>& a) {
  return detail::unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Var<T> log(const Var<T>& a) {
  return detail::unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

/// Row-wise softmax. `mask`, when given, has the same shape and holds 0 or -inf;
/// masked entries get probability exactly 0.
template <class T>
Var<T> softmax_rows(const Var<T>& a, const Tensor<T>* mask = nullptr) {
  if (a.shape().size() > 2 || a.shape().empty())
    throw Error(ErrorCode::Shape, "softmax_rows: expected a vector or matrix, got " + shape_str(a.shape()));
  if (mask && mask->shape != a.shape()) shape_error("softmax_rows(mask)", a.shape(), mask->shape);
  const auto& x = a.value();
  const std::size_t R = x.rows(), C = x.cols();
  Tensor<T> y(x.shape);
  for (std::size_t r = 0; r < R; ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < C; ++c) {
      const bool off = mask && std::isinf((*mask)[r * C + c]);
      if (!off) mx = std::max(mx, x[r * C + c]);
    }
    T z = 0;
    for (std::size_t c = 0; c < C; ++c) {
      const bool off = mask && std::isinf((*mask)[r * C + c]);
      const T e = off ? T(0) : std::exp(x[r * C + c] - mx);
      y[r * C + c] = e;
      z += e;
    }
    for (std::size_t c = 0; c < C; ++c) y[r * C + c] /= z;
  }
  std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia, R, C](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    const auto& yv = tp.value(self);
    auto g = tp.grad(ia);
    for (std::size_t r = 0; r < R; ++r) {
      T dot = 0;
      for (std::size_t c = 0; c < C; ++c) dot += go[r * C + c] * yv[r * C + c];
      for (std::size_t c = 0; c < C; ++c) g[r * C + c] += yv[r * C + c] * (go[r * C + c] - dot);
    }
  });
}

template <class T>
Var<T> log_softmax_rows(const Var<T>& a) {
  detail::require_rank2("log_softmax_rows", a);
  const auto& x = a.value();
  const std::size_t R = x.rows(), C = x.cols();
  Tensor<T> y(x.shape);
  for (std::size_t r = 0; r < R; ++r) {
    T mx = x[r * C];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, x[r * C + c]);
    T z = 0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(x[r * C + c] - mx);
    const T lz = mx + std::log(z);
    for (std::size_t c = 0; c < C; ++c) y[r * C + c] = x[r * C + c] - lz;
  }
  std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia, R, C](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    const auto& yv = tp.value(self);
    auto g = tp.grad(ia);
    for (std::size_t r = 0; r < R; ++r) {
      T s = 0;
      for (std::size_t c = 0; c < C; ++c) s += go[r * C + c];
      for (std::size_t c = 0; c < C; ++c) g[r * C + c] += go[r * C + c] - std::exp(yv[r * C + c]) * s;
    }
  });
}

/// out[r] = a[r, idx[r]]
template <class T>
Var<T> pick(const Var<T>& a, std::vector<std::size_t> idx) {
  detail::require_rank2("pick", a);
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  if (idx.size() != R) shape_error("pick", a.shape(), Shape{idx.size()});
  Tensor<T> y(Shape{R});
  for (std::size_t r = 0; r < R; ++r) {
    if (idx[r] >= C) throw Error(ErrorCode::Shape, "pick: column " + std::to_string(idx[r]) + " out of range for " + shape_str(a.shape()));
    y[r] = a.value()[r * C + idx[r]];
  }
  std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia, C, idx = std::move(idx)](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    auto g = tp.grad(ia);
    for (std::size_t r = 0; r < idx.size(); ++r) g[r * C + idx[r]] += go[r];
  });
}

/// Mean over rows of -log softmax(logits[r])[targets[r]].
template <class T>
Var<T> cross_entropy_rows(const Var<T>& logits, const std::vector<std::size_t>& targets) {
  auto lp = pick(log_softmax_rows(logits), targets);
  return scale(sum(lp), T(-1) / static_cast<T>(targets.size()));
}

template <class T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw Error(ErrorCode::Shape, "concat_cols: no inputs");
  const std::size_t R = parts[0].shape().size() == 2 ? parts[0].shape()[0] : 0;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_rank2("concat_cols", p);
    if (p.shape()[0] != R) shape_error("concat_cols", parts[0].shape(), p.shape());
    widths.push_back(p.shape()[1]);
    total += p.shape()[1];
  }
  Tensor<T> y({R, total});
  std::vector<std::size_t> ids;
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].value();
    for (std::size_t r = 0; r < R; ++r)
      std::copy_n(&v[r * widths[k]], widths[k], &y[r * total + off]);
    off += widths[k];
    ids.push_back(parts[k].id());
  }
  return parts[0].tape().record(std::move(y), parts, [ids, widths, R, total](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    std::size_t off2 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) {
        auto g = tp.grad(ids[k]);
        for (std::size_t r = 0; r < R; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) g[r * widths[k] + c] += go[r * total + off2 + c];
      }
      off2 += widths[k];
    }
  });
}

template <class T>
Var<T> concat_cols(std::initializer_list<Var<T>> parts) {
  std::vector<Var<T>> v(parts);
  return concat_cols<T>(std::span<const Var<T>>(v));
}

template <class T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw Error(ErrorCode::Shape, "concat_rows: no inputs");
  detail::require_rank2("concat_rows", parts[0]);
  const std::size_t C = parts[0].shape()[1];
  std::size_t R = 0;
  std::vector<std::size_t> ids, sizes;
  for (const auto& p : parts) {
    detail::require_rank2("concat_rows", p);
    if (p.shape()[1] != C) shape_error("concat_rows", parts[0].shape(), p.shape());
    R += p.shape()[0];
    ids.push_back(p.id());
    sizes.push_back(p.value().size());
  }
  Tensor<T> y({R, C});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += p.value().size();
  }
  return parts[0].tape().record(std::move(y), parts, [ids, sizes](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    std::size_t off2 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) {
        auto g = tp.grad(ids[k]);
        for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += go[off2 + i];
      }
      off2 += sizes[k];
    }
  });
}

template <class T>
Var<T> slice_cols(const Var<T>& a, std::size_t start, std::size_t len) {
  detail::require_rank2("slice_cols", a);
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  if (start + len > C) shape_error("slice_cols", a.shape(), Shape{start, len});
  Tensor<T> y({R, len});
  for (std::size_t r = 0; r < R; ++r) std::copy_n(&a.value()[r * C + start], len, &y[r * len]);
  std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia, R, C, start, len](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    auto g = tp.grad(ia);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < len; ++c) g[r * C + start + c] += go[r * len + c];
  });
}

template <class T>
Var<T> slice_rows(const Var<T>& a, std::size_t start, std::size_t len) {
  detail::require_rank2("slice_rows", a);
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  if (start + len > R) shape_error("slice_rows", a.shape(), Shape{start, len});
  Tensor<T> y({len, C});
  std::copy_n(&a.value()[start * C], len * C, y.data.data());
  std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia, C, start](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    auto g = tp.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) g[start * C + i] += go[i];
  });
}

/// Embedding lookup: out[i] = table[ids[i]].
template <class T>
Var<T> gather_rows(const Var<T>& table, std::vector<std::size_t> ids) {
  detail::require_rank2("gather_rows", table);
  const std::size_t R = table.shape()[0], C = table.shape()[1];
  Tensor<T> y({ids.size(), C});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= R)
      throw Error(ErrorCode::InvalidId, "gather_rows: row " + std::to_string(ids[i]) + " out of range for " + shape_str(table.shape()));
    std::copy_n(&table.value()[ids[i] * C], C, &y[i * C]);
  }
  std::size_t it = table.id();
  return table.tape().record(std::move(y), {table}, [it, C, ids = std::move(ids)](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    auto g = tp.grad(it);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t c = 0; c < C; ++c) g[ids[i] * C + c] += go[i * C + c];
  });
}

/// out[r, col_map[c]] += a[r, c]; col_map entries must be < width.
template <class T>
Var<T> scatter_cols(const Var<T>& a, std::vector<std::size_t> col_map, std::size_t width) {
  detail::require_rank2("scatter_cols", a);
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  if (col_map.size() != C) shape_error("scatter_cols", a.shape(), Shape{col_map.size()});
  Tensor<T> y({R, width});
  for (std::size_t c = 0; c < C; ++c)
    if (col_map[c] >= width) throw Error(ErrorCode::InvalidId, "scatter_cols: target column out of range");
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) y[r * width + col_map[c]] += a.value()[r * C + c];
  std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia, R, C, width, col_map = std::move(col_map)](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    auto g = tp.grad(ia);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) g[r * C + c] += go[r * width + col_map[c]];
  });
}

/// out[s] = mean of rows r with segment[r] == s; empty segments are 0.
template <class T>
Var<T> segment_mean_rows(const Var<T>& a, std::vector<std::size_t> segment, std::size_t num_segments) {
  detail::require_rank2("segment_mean_rows", a);
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  if (segment.size() != R) shape_error("segment_mean_rows", a.shape(), Shape{segment.size()});
  std::vector<T> inv_count(num_segments, T(0));
  for (auto s : segment) {
    if (s >= num_segments) throw Error(ErrorCode::InvalidId, "segment_mean_rows: segment id out of range");
    inv_count[s] += T(1);
  }
  for (auto& c : inv_count) c = c > T(0) ? T(1) / c : T(0);
  Tensor<T> y({num_segments, C});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c) y[segment[r] * C + c] += a.value()[r * C + c] * inv_count[segment[r]];
  std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a},
                         [ia, R, C, segment = std::move(segment), inv_count = std::move(inv_count)](Tape<T>& tp, std::size_t self) {
                           auto go = tp.grad(self);
                           auto g = tp.grad(ia);
                           for (std::size_t r = 0; r < R; ++r)
                             for (std::size_t c = 0; c < C; ++c) g[r * C + c] += go[segment[r] * C + c] * inv_count[segment[r]];
                         });
}

template <class T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (T v : a.value().data) s += v;
  std::size_t ia = a.id();
  return a.tape().record(Tensor<T>::scalar(s), {a}, [ia](Tape<T>& tp, std::size_t self) {
    const T go = tp.grad(self)[0];
    for (auto& g : tp.grad(ia)) g += go;
  });
}

template <class T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

/// Max over all elements; the gradient goes to the first maximal element.
template <class T>
Var<T> max_reduce(const Var<T>& a) {
  const auto& d = a.value().data;
  if (d.empty()) throw Error(ErrorCode::Shape, "max_reduce: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < d.size(); ++i)
    if (d[i] > d[best]) best = i;
  std::size_t ia = a.id();
  return a.tape().record(Tensor<T>::scalar(d[best]), {a}, [ia, best](Tape<T>& tp, std::size_t self) {
    tp.grad(ia)[best] += tp.grad(self)[0];
  });
}

/// Row-wise layer normalisation with learned gain and bias of length cols.
template <class T>
Var<T> layer_norm_rows(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-5)) {
  detail::require_rank2("layer_norm_rows", x);
  const std::size_t R = x.shape()[0], C = x.shape()[1];
  if (gain.value().size() != C) shape_error("layer_norm_rows(gain)", x.shape(), gain.shape());
  if (bias.value().size() != C) shape_error("layer_norm_rows(bias)", x.shape(), bias.shape());
  const auto& xv = x.value();
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  Tensor<T> y({R, C});
  std::vector<T> xhat(R * C), rstd(R);
  for (std::size_t r = 0; r < R; ++r) {
    T mu = 0;
    for (std::size_t c = 0; c < C; ++c) mu += xv[r * C + c];
    mu /= static_cast<T>(C);
    T var = 0;
    for (std::size_t c = 0; c < C; ++c) var += (xv[r * C + c] - mu) * (xv[r * C + c] - mu);
    var /= static_cast<T>(C);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < C; ++c) {
      xhat[r * C + c] = (xv[r * C + c] - mu) * rstd[r];
      y[r * C + c] = xhat[r * C + c] * gv[c] + bv[c];
    }
  }
  std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(std::move(y), {x, gain, bias},
                         [ix, ig, ib, R, C, xhat = std::move(xhat), rstd = std::move(rstd)](Tape<T>& tp, std::size_t self) {
                           auto go = tp.grad(self);
                           const auto& gv2 = tp.value(ig);
                           if (tp.requires_grad(ig)) {
                             auto g = tp.grad(ig);
                             for (std::size_t r = 0; r < R; ++r)
                               for (std::size_t c = 0; c < C; ++c) g[c] += go[r * C + c] * xhat[r * C + c];
                           }
                           if (tp.requires_grad(ib)) {
                             auto g = tp.grad(ib);
                             for (std::size_t r = 0; r < R; ++r)
                               for (std::size_t c = 0; c < C; ++c) g[c] += go[r * C + c];
                           }
                           if (tp.requires_grad(ix)) {
                             auto g = tp.grad(ix);
                             for (std::size_t r = 0; r < R; ++r) {
                               T s1 = 0, s2 = 0;
                               for (std::size_t c = 0; c < C; ++c) {
                                 const T dxh = go[r * C + c] * gv2[c];
                                 s1 += dxh;
                                 s2 += dxh * xhat[r * C + c];
                               }
                               for (std::size_t c = 0; c < C; ++c) {
                                 const T dxh = go[r * C + c] * gv2[c];
                                 g[r * C + c] += rstd[r] / static_cast<T>(C) *
                                                 (static_cast<T>(C) * dxh - s1 - xhat[r * C + c] * s2);
                               }
                             }
                           }
                         });
}

/// Inverted dropout. rate == 0 (the default everywhere) is an exact identity.
template <class T, class Rng>
Var<T> dropout(const Var<T>& a, T rate, Rng& rng) {
  if (rate <= T(0)) return a;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(rate));
  Tensor<T> m(a.shape());
  for (auto& v : m.data) v = keep(rng) ? T(1) / (T(1) - rate) : T(0);
  return mul(a, a.tape().constant(std::move(m)));
}

/// Mean binary cross-entropy of probabilities p against 0/1 labels; logs are
/// clamped at 1e-12 and clamped terms contribute no gradient.
template <class T>
Var<T> bce(const Var<T>& p, const Tensor<T>& labels) {
  if (p.value().size() != labels.size()) shape_error("bce", p.shape(), labels.shape);
  constexpr T floor = T(1e-12);
  const auto& pv = p.value();
  const std::size_t n = pv.size();
  T loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T y = labels[i];
    loss -= y * std::log(std::max(pv[i], floor)) + (T(1) - y) * std::log(std::max(T(1) - pv[i], floor));
  }
  loss /= static_cast<T>(n);
  std::size_t ip = p.id();
  return p.tape().record(Tensor<T>::scalar(loss), {p}, [ip, n, labels](Tape<T>& tp, std::size_t self) {
    const T go = tp.grad(self)[0] / static_cast<T>(n);
    const auto& pv2 = tp.value(ip);
    auto g = tp.grad(ip);
    for (std::size_t i = 0; i < n; ++i) {
      const T y = labels[i];
      T d = 0;
      if (y != T(0) && pv2[i] > floor) d -= y / pv2[i];
      if (y != T(1) && T(1) - pv2[i] > floor) d += (T(1) - y) / (T(1) - pv2[i]);
      g[i] += go * d;
    }
  });
}

/// Reinterprets the shape without copying semantics (same element order).
template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  if (numel(shape) != a.value().size()) shape_error("reshape", a.shape(), shape);
  Tensor<T> y(std::move(shape), a.value().data);
  std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia](Tape<T>& tp, std::size_t self) {
    auto go = tp.grad(self);
    auto g = tp.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) g[i] += go[i];
  });
}

}  // namespace grf::ad
