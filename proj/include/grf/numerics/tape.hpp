#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "grf/numerics/tensor.hpp"

namespace grf::ad {

template <class T>
class Tape;

/// Handle to a value recorded on a tape. Cheap to copy; valid while its tape lives.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape; }
  T item() const { return value().item(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  /// Gradient after backward(); zeros if nothing reached this node.
  std::vector<T> grad() const { return tape_->grad_copy(id_); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Linear record of operations. backward() walks it in exact reverse order and
/// accumulates gradients additively. Parameter leaves write straight into
/// Parameter::grad. Single-threaded; use one tape per thread.
template <class T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), nullptr, false, nullptr, {}); }

  /// Leaf that keeps its own gradient (read it back with Var::grad()).
  Var<T> input(Tensor<T> value) { return push(std::move(value), nullptr, true, nullptr, {}); }

  /// Leaf borrowing a parameter's value; gradients accumulate into p.grad.
  Var<T> param(Parameter<T>& p) {
    if (p.grad.shape != p.value.shape) p.grad = Tensor<T>(p.value.shape);
    return push({}, &p.value, true, p.grad.data.data(), {});
  }

  /// Records an op result. It needs a gradient iff any parent does.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, Backward fn) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || requires_grad(p.id());
    return push(std::move(value), nullptr, rg, nullptr, rg ? std::move(fn) : Backward{});
  }

  Var<T> record(Tensor<T> value, std::span<const Var<T>> parents, Backward fn) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || requires_grad(p.id());
    return push(std::move(value), nullptr, rg, nullptr, rg ? std::move(fn) : Backward{});
  }

  const Tensor<T>& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.borrowed ? *n.borrowed : n.owned;
  }

  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Mutable gradient buffer for a node, allocated (zeroed) on first use.
  std::span<T> grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.external_grad) return {n.external_grad, value(id).size()};
    if (n.grad.empty()) n.grad.assign(value(id).size(), T(0));
    return n.grad;
  }

  std::vector<T> grad_copy(std::size_t id) const {
    const Node& n = nodes_[id];
    std::size_t len = value(id).size();
    if (n.external_grad) return std::vector<T>(n.external_grad, n.external_grad + len);
    if (n.grad.empty()) return std::vector<T>(len, T(0));
    return n.grad;
  }

  /// Seeds every element of root's gradient with `seed` and back-propagates.
  void backward(Var<T> root, T seed = T(1)) {
    if (!requires_grad(root.id())) return;
    for (auto& g : grad(root.id())) g += seed;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward) continue;
      if (n.grad.empty()) continue;  // never reached from root
      n.backward(*this, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* borrowed = nullptr;
    bool requires_grad = false;
    T* external_grad = nullptr;
    std::vector<T> grad;
    Backward backward;
  };

  Var<T> push(Tensor<T> value, const Tensor<T>* borrowed, bool rg, T* ext, Backward fn) {
    Node n;
    n.owned = std::move(value);
    n.borrowed = borrowed;
    n.requires_grad = rg;
    n.external_grad = ext;
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;  // stable references across push_back
};

}  // namespace grf::ad
