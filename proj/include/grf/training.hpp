#pragma once

// Losses, Adam with linear decay, the training loop and teacher-forced evaluation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "grf/model.hpp"

namespace grf {

enum class GenReduction { Sum, MeanPerToken };

struct TrainConfig {
  double alpha = 1.0;  // gate loss weight
  double beta = 1.0;   // weak relevance loss weight
  double lr = 3e-3;
  std::size_t total_steps = 500;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-6;
  std::size_t checkpoint_every = 100;
  std::size_t patience = 0;  // checkpoints without dev improvement before stopping; 0 = off
  GenReduction gen_reduction = GenReduction::Sum;

  void validate() const {
    if (alpha < 0 || beta < 0) throw Error(ErrorCode::Config, "train: alpha and beta must be >= 0");
    if (total_steps < 1) throw Error(ErrorCode::Config, "train: total_steps must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::Config, "train: batch_size must be >= 1");
    if (!(lr >= 0)) throw Error(ErrorCode::Config, "train: lr must be >= 0");
  }
};

/// -sum_t log p(y_t) (or the per-token mean) over the gold tokens.
template <class T>
ad::Var<T> loss_gen(const ad::Var<T>& probs, const std::vector<TokenId>& targets, GenReduction red = GenReduction::Sum) {
  auto nll = ad::scale(ad::sum(ad::log(ad::pick(probs, std::vector<std::size_t>(targets.begin(), targets.end())))), T(-1));
  if (red == GenReduction::MeanPerToken) nll = ad::scale(nll, T(1) / static_cast<T>(targets.size()));
  return nll;
}

/// Mean BCE of gate values [S, 1] against per-position labels.
template <class T>
ad::Var<T> loss_gate(const ad::Var<T>& gate, const std::vector<std::uint8_t>& labels) {
  ad::Tensor<T> y({labels.size()});
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] ? T(1) : T(0);
  return ad::bce(gate, y);
}

/// Mean BCE of relevance [S, E] against static per-edge labels, over edges and steps.
template <class T>
ad::Var<T> loss_weak(const ad::Var<T>& relevance, const std::vector<std::uint8_t>& edge_labels) {
  const std::size_t S = relevance.value().rows(), E = edge_labels.size();
  if (relevance.value().cols() != E) ad::shape_error("loss_weak", relevance.shape(), ad::Shape{S, E});
  ad::Tensor<T> y({S, E});
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t e = 0; e < E; ++e) y(s, e) = edge_labels[e] ? T(1) : T(0);
  return ad::bce(relevance, y);
}

template <class T>
struct ExampleLoss {
  ad::Var<T> total, gen, gate, weak;
  StepOutputs<T> steps;
};

/// Teacher-forced forward over s = (x, [bos], y_1..y_M) scoring y_1..y_M, [eos].
template <class T>
ExampleLoss<T> example_loss(ad::Tape<T>& tape, GrfModel<T>& m, const Example& ex, const TrainConfig& cfg) {
  if (ex.target.empty() || ex.target.back() != Vocab::kEos) throw Error(ErrorCode::Format, "example: target must end with [eos]");
  if (ex.gate_labels.size() != ex.target.size()) throw Error(ErrorCode::Format, "example: gate label count != target length");
  if (ex.weak_labels.size() != ex.graph.edges.size()) throw Error(ErrorCode::Format, "example: weak label count != edge count");
  std::vector<TokenId> prefix(ex.target.begin(), ex.target.end() - 1);
  auto seq = build_sequence(ex.source, prefix, m.config.max_len);
  ExampleLoss<T> out;
  out.steps = forward_steps(tape, m, seq, ex.graph, ex.node_tokens, seq.source_length, ex.target.size());
  out.gen = loss_gen(out.steps.probs, ex.target, cfg.gen_reduction);
  out.gate = loss_gate(out.steps.gate, ex.gate_labels);
  if (out.steps.has_relevance && !ex.graph.edges.empty())
    out.weak = loss_weak(out.steps.relevance, ex.weak_labels);
  else
    out.weak = tape.constant(ad::Tensor<T>::scalar(T(0)));
  out.total = ad::add(ad::add(out.gen, ad::scale(out.gate, static_cast<T>(cfg.alpha))), ad::scale(out.weak, static_cast<T>(cfg.beta)));
  return out;
}

/// lr(t) = lr0 * (1 - t / T) for update index t = 0..T.
inline double linear_decay(double lr0, std::size_t step, std::size_t total) {
  if (step >= total) return 0.0;
  return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total));
}

/// Bias-corrected Adam over a fixed parameter list.
template <class T>
class Adam {
 public:
  Adam(std::vector<ad::Parameter<T>*> params, double beta1, double beta2, double eps)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        const double mhat = m[i] / c1, vhat = v[i] / c2;
        p.value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<ad::Parameter<T>*> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct TrainLogRow {
  std::size_t step = 0;
  double lr = 0, l_gen = 0, l_gate = 0, l_weak = 0, gate_mean = 0;
};

inline std::string train_log_header() { return "step,lr,l_gen,l_gate,l_weak,gate_mean\n"; }

inline std::string to_csv(const TrainLogRow& r) {
  std::ostringstream out;
  out.precision(9);
  out << r.step << ',' << r.lr << ',' << r.l_gen << ',' << r.l_gate << ',' << r.l_weak << ',' << r.gate_mean << '\n';
  return out.str();
}

struct TrainHooks {
  std::function<void(const TrainLogRow&)> on_step;
  /// Called every checkpoint_every steps and after the last step.
  std::function<void(std::size_t step)> on_checkpoint;
  /// Optional dev loss; with patience > 0, training stops once it has not
  /// improved for `patience` consecutive checkpoints.
  std::function<double()> dev_loss;
};

namespace detail {

inline std::string describe(const Example& ex, const Vocab& v) {
  return "src='" + v.decode(ex.source) + "' tgt='" + v.decode(ex.target) + "' nodes=" + std::to_string(ex.graph.size()) +
         " edges=" + std::to_string(ex.graph.edges.size());
}

}  // namespace detail

/// Mini-batch Adam. Batches are drawn from a seeded permutation of the dataset,
/// reshuffled each epoch; the batch loss is the mean of per-example losses.
template <class T>
std::vector<TrainLogRow> train(GrfModel<T>& model, const std::vector<Example>& data, const TrainConfig& cfg,
                               const TrainHooks& hooks = {}) {
  cfg.validate();
  if (data.empty()) throw Error(ErrorCode::Format, "train: empty dataset");
  ad::Rng rng(cfg.seed);
  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::size_t cursor = 0;

  auto params = model.parameters();
  Adam<T> opt(params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  std::vector<TrainLogRow> log;
  const std::size_t B = std::min(cfg.batch_size, data.size());
  double best_dev = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    model.zero_grad();
    TrainLogRow row;
    row.step = step + 1;
    row.lr = linear_decay(cfg.lr, step, cfg.total_steps);
    std::size_t gate_count = 0;
    for (std::size_t b = 0; b < B; ++b) {
      if (cursor == perm.size()) {
        std::shuffle(perm.begin(), perm.end(), rng);
        cursor = 0;
      }
      const Example& ex = data[perm[cursor++]];
      ad::Tape<T> tape;
      auto loss = example_loss(tape, model, ex, cfg);
      const double total = static_cast<double>(loss.total.item());
      if (!std::isfinite(total)) {
        throw Error(ErrorCode::NonFinite, "train: non-finite loss at step " + std::to_string(step + 1) + " (l_gen=" +
                                              std::to_string(loss.gen.item()) + ", l_gate=" + std::to_string(loss.gate.item()) +
                                              ", l_weak=" + std::to_string(loss.weak.item()) + ") on example " +
                                              std::to_string(perm[cursor - 1]) + ": " + detail::describe(ex, model.vocab));
      }
      tape.backward(loss.total, T(1) / static_cast<T>(B));
      row.l_gen += static_cast<double>(loss.gen.item()) / static_cast<double>(B);
      row.l_gate += static_cast<double>(loss.gate.item()) / static_cast<double>(B);
      row.l_weak += static_cast<double>(loss.weak.item()) / static_cast<double>(B);
      for (T g : loss.steps.gate.value().data) row.gate_mean += static_cast<double>(g);
      gate_count += loss.steps.gate.value().size();
    }
    row.gate_mean /= static_cast<double>(std::max<std::size_t>(gate_count, 1));
    opt.step(row.lr);
    log.push_back(row);
    if (hooks.on_step) hooks.on_step(row);

    const bool last = step + 1 == cfg.total_steps;
    if ((cfg.checkpoint_every && (step + 1) % cfg.checkpoint_every == 0) || last) {
      if (hooks.on_checkpoint) hooks.on_checkpoint(step + 1);
      if (hooks.dev_loss && cfg.patience > 0) {
        const double dev = hooks.dev_loss();
        if (dev < best_dev) {
          best_dev = dev;
          stale = 0;
        } else if (++stale >= cfg.patience) {
          break;
        }
      }
    }
  }
  return log;
}

struct EvalResult {
  double nll = 0;  // summed over tokens
  std::size_t tokens = 0;
  std::size_t correct = 0;  // argmax of the mixed distribution equals gold
  double gate_concept_sum = 0, gate_other_sum = 0;
  std::size_t gate_concept_n = 0, gate_other_n = 0;

  double per_token_nll() const { return tokens ? nll / static_cast<double>(tokens) : 0.0; }
  double accuracy() const { return tokens ? static_cast<double>(correct) / static_cast<double>(tokens) : 0.0; }
  double gate_concept_mean() const { return gate_concept_n ? gate_concept_sum / static_cast<double>(gate_concept_n) : 0.0; }
  double gate_other_mean() const { return gate_other_n ? gate_other_sum / static_cast<double>(gate_other_n) : 0.0; }
};

/// Teacher-forced NLL, token accuracy and gate statistics.
template <class T>
EvalResult evaluate(GrfModel<T>& model, const std::vector<Example>& data) {
  EvalResult r;
  TrainConfig cfg;
  for (const auto& ex : data) {
    ad::Tape<T> tape;
    auto loss = example_loss(tape, model, ex, cfg);
    r.nll += static_cast<double>(loss.gen.item());
    const auto& probs = loss.steps.probs.value();
    const std::size_t V = probs.cols();
    for (std::size_t s = 0; s < ex.target.size(); ++s) {
      const auto* row = &probs.data[s * V];
      const auto best = static_cast<std::size_t>(std::max_element(row, row + V) - row);
      r.correct += best == ex.target[s];
      const double g = static_cast<double>(loss.steps.gate.value()[s]);
      if (ex.gate_labels[s]) {
        r.gate_concept_sum += g;
        ++r.gate_concept_n;
      } else {
        r.gate_other_sum += g;
        ++r.gate_other_n;
      }
    }
    r.tokens += ex.target.size();
  }
  return r;
}

}  // namespace grf
