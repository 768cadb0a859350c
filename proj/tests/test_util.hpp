#pragma once

#include <vector>

#include "vpe/rng.hpp"
#include "vpe/tensor.hpp"

namespace vpe::test {

template <typename T>
Tensor<T> random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(scale * rng.normal());
  return t;
}

// Random values bounded away from zero, for kinked activations.
template <typename T>
Tensor<T> random_tensor_away_from_zero(std::vector<std::size_t> shape, Rng& rng,
                                       double min_abs = 0.05) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double mag = min_abs + std::abs(rng.normal());
    t[i] = static_cast<T>(rng.bernoulli(0.5) ? mag : -mag);
  }
  return t;
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

}  // namespace vpe::test
