#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "meshnet/autodiff.hpp"

namespace meshnet {

// Adam with bias correction. Moments are created lazily on the first step
// to match the parameter shapes.
template <typename T>
struct AdamState {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

template <typename T>
void adam_step(std::span<Parameter<T>> params, std::span<const Tensor<T>> grads, AdamState<T>& state);

}  // namespace meshnet
