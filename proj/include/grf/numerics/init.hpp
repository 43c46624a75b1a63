#pragma once

#include <cmath>
#include <random>

#include "grf/numerics/tensor.hpp"

namespace grf::ad {

using Rng = std::mt19937_64;

template <class T>
Tensor<T> normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
  return t;
}

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <class T>
Tensor<T> xavier_tensor(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Tensor<T> t(Shape{fan_in, fan_out});
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace grf::ad
