#pragma once

#include "meshnet/autodiff.hpp"
#include "meshnet/topology.hpp"

namespace meshnet {

inline constexpr std::size_t kConvSlots = 5;

// weights: out x in x 5. Slot 0 multiplies the edge itself, slots 1..4 the
// order-independent neighbor terms (|a-c|, a+c, |b-d|, b+d).
template <typename T>
struct ConvKernel {
  Tensor<T> weights;
  Tensor<T> bias;

  std::size_t out_channels() const noexcept { return weights.rank() ? weights.shape()[0] : 0; }
  std::size_t in_channels() const noexcept { return weights.rank() > 1 ? weights.shape()[1] : 0; }
};

// features (C x E) -> C x E x 5 receptive-field tensor. (a, b, c, d) are the
// stored neighbors of each edge; a sentinel neighbor reads as zero.
template <typename T>
Tensor<T> build_symmetric_neighborhood(const Tensor<T>& features, const EdgeTopology& topo);

// Differentiable unwrap: (C*5) x E matrix whose row c*5+s holds slot s of
// channel c, ready to be left-multiplied by the kernel viewed as
// out x (in*5).
template <typename T>
Var unwrap_neighborhood(Tape<T>& tape, Var features, const EdgeTopology& topo);

// Kernel (out x in x 5, bias out) applied to C x E features.
template <typename T>
Var mesh_conv(Tape<T>& tape, Var weights, Var bias, Var features, const EdgeTopology& topo);

template <typename T>
Tensor<T> mesh_conv_forward(const ConvKernel<T>& kernel, const Tensor<T>& features, const EdgeTopology& topo);

}  // namespace meshnet
