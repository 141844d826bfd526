#include "meshnet/adam.hpp"

#include <cmath>

#include "meshnet/error.hpp"

namespace meshnet {

template <typename T>
void adam_step(std::span<Parameter<T>> params, std::span<const Tensor<T>> grads, AdamState<T>& state) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: one gradient per parameter required");
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.emplace_back(p.value.shape(), T{0});
      state.v.emplace_back(p.value.shape(), T{0});
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.data();
    const auto g = grads[i].data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    if (g.size() != w.size() || m.size() != w.size()) {
      throw ShapeError("adam_step: shape mismatch for " + params[i].name);
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      const double mk = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
      const double vk = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double update = state.lr * (mk / bc1) / (std::sqrt(vk / bc2) + state.eps);
      w[k] = static_cast<T>(w[k] - update);
    }
  }
}

template void adam_step<float>(std::span<Parameter<float>>, std::span<const Tensor<float>>, AdamState<float>&);
template void adam_step<double>(std::span<Parameter<double>>, std::span<const Tensor<double>>, AdamState<double>&);

}  // namespace meshnet
