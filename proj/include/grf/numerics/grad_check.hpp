#pragma once

// Central finite differences against reverse-mode gradients.
//
// Relative error per coordinate is |analytic - numeric| / max(|analytic|, |numeric|, abs_floor).
// The floor keeps near-zero gradients from producing meaningless ratios; below it the
// check degrades to an absolute test at abs_floor * tolerance.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "grf/numerics/ops.hpp"

namespace grf::ad {

struct GradCheckOptions {
  double eps = 1e-5;         // step is eps * max(1, |x|)
  double tolerance = 1e-5;   // max relative error accepted
  double abs_floor = 1e-4;
  /// Skip coordinates with |x| < 10*eps, where a ReLU/max kink at 0 would
  /// make the finite difference straddle the non-differentiable point.
  bool skip_near_zero = false;
};

struct GradCheckReport {
  std::vector<double> max_rel_error;  // one entry per input
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double worst = 0.0;
  bool passed = true;
};

namespace detail {

inline double rel_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

template <class T>
void require_finite(T v, const char* what) {
  if (!std::isfinite(static_cast<double>(v))) throw Error(ErrorCode::NonFinite, std::string("grad_check: non-finite ") + what);
}

}  // namespace detail

/// Checks d f / d inputs, where f builds a scalar from leaf Vars on a fresh tape.
template <class T>
GradCheckReport grad_check(const std::function<Var<T>(Tape<T>&, std::span<const Var<T>>)>& f,
                           std::vector<Tensor<T>> inputs, const GradCheckOptions& opt = {}) {
  auto evaluate = [&](bool with_grad, std::vector<std::vector<T>>* grads) {
    Tape<T> tape;
    std::vector<Var<T>> leaves;
    for (const auto& x : inputs) leaves.push_back(with_grad ? tape.input(x) : tape.constant(x));
    Var<T> out = f(tape, leaves);
    const T v = out.item();
    detail::require_finite(v, "function value");
    if (with_grad) {
      tape.backward(out);
      for (const auto& l : leaves) grads->push_back(l.grad());
    }
    return v;
  };

  for (const auto& x : inputs)
    for (T v : x.data) detail::require_finite(v, "input");

  std::vector<std::vector<T>> analytic;
  evaluate(true, &analytic);

  GradCheckReport report;
  report.max_rel_error.assign(inputs.size(), 0.0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const T x0 = inputs[k][i];
      if (opt.skip_near_zero && std::abs(static_cast<double>(x0)) < 10 * opt.eps) {
        ++report.skipped;
        continue;
      }
      const T h = static_cast<T>(opt.eps * std::max(1.0, std::abs(static_cast<double>(x0))));
      inputs[k][i] = x0 + h;
      const double fp = evaluate(false, nullptr);
      inputs[k][i] = x0 - h;
      const double fm = evaluate(false, nullptr);
      inputs[k][i] = x0;
      const double numeric = (fp - fm) / (2.0 * static_cast<double>(h));
      const double a = static_cast<double>(analytic[k][i]);
      detail::require_finite(a, "analytic gradient");
      const double e = detail::rel_error(a, numeric, opt.abs_floor);
      report.max_rel_error[k] = std::max(report.max_rel_error[k], e);
      ++report.checked;
    }
    report.worst = std::max(report.worst, report.max_rel_error[k]);
  }
  report.passed = report.worst < opt.tolerance;
  return report;
}

/// Same check for parameters: `loss` must build its graph via tape.param(p).
/// Parameter values are perturbed in place and restored.
template <class T>
GradCheckReport grad_check_params(const std::function<Var<T>(Tape<T>&)>& loss, std::span<Parameter<T>* const> params,
                                  const GradCheckOptions& opt = {}) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<T> tape;
    Var<T> out = loss(tape);
    detail::require_finite(out.item(), "function value");
    tape.backward(out);
  }
  auto value_only = [&]() {
    Tape<T> tape;
    const T v = loss(tape).item();
    detail::require_finite(v, "function value");
    return static_cast<double>(v);
  };

  GradCheckReport report;
  report.max_rel_error.assign(params.size(), 0.0);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T x0 = p.value[i];
      if (opt.skip_near_zero && std::abs(static_cast<double>(x0)) < 10 * opt.eps) {
        ++report.skipped;
        continue;
      }
      const T h = static_cast<T>(opt.eps * std::max(1.0, std::abs(static_cast<double>(x0))));
      p.value[i] = x0 + h;
      const double fp = value_only();
      p.value[i] = x0 - h;
      const double fm = value_only();
      p.value[i] = x0;
      const double numeric = (fp - fm) / (2.0 * static_cast<double>(h));
      const double a = static_cast<double>(p.grad[i]);
      detail::require_finite(a, "analytic gradient");
      report.max_rel_error[k] = std::max(report.max_rel_error[k], detail::rel_error(a, numeric, opt.abs_floor));
      ++report.checked;
    }
    report.worst = std::max(report.worst, report.max_rel_error[k]);
  }
  report.passed = report.worst < opt.tolerance;
  return report;
}

}  // namespace grf::ad
