#include "meshnet/mesh_conv.hpp"

#include <cmath>
#include <string>

#include "meshnet/error.hpp"

namespace meshnet {
namespace {

template <typename T>
void check_width(const Tensor<T>& x, const EdgeTopology& topo) {
  if (x.rank() != 2 || x.cols() != topo.edge_count()) {
    throw ShapeError("mesh_conv: features " + shape_string(x.shape()) + " do not match " +
                     std::to_string(topo.edge_count()) + " edges");
  }
}

template <typename T>
T sign(T v) {
  return v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0});
}

// Writes slot s of channel c for edge e via `put(c, e, s, value)`.
template <typename T, typename Put>
void for_each_slot(const Tensor<T>& x, const EdgeTopology& topo, Put&& put) {
  const auto C = x.rows();
  const auto E = topo.edge_count();
  const EdgeId none = topo.sentinel();
  for (std::size_t c = 0; c < C; ++c) {
    const auto row = x.row(c);
    auto at = [&](EdgeId id) { return id == none ? T{0} : row[static_cast<std::size_t>(id)]; };
    for (std::size_t e = 0; e < E; ++e) {
      const auto& nb = topo.neighbors[e];
      const T a = at(nb[0]), b = at(nb[1]), cc = at(nb[2]), d = at(nb[3]);
      put(c, e, 0, row[e]);
      put(c, e, 1, std::abs(a - cc));
      put(c, e, 2, a + cc);
      put(c, e, 3, std::abs(b - d));
      put(c, e, 4, b + d);
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> build_symmetric_neighborhood(const Tensor<T>& features, const EdgeTopology& topo) {
  check_width(features, topo);
  const auto C = features.rows(), E = topo.edge_count();
  Tensor<T> out({C, E, kConvSlots});
  auto data = out.data();
  for_each_slot(features, topo, [&](std::size_t c, std::size_t e, std::size_t s, T v) {
    data[(c * E + e) * kConvSlots + s] = v;
  });
  return out;
}

template <typename T>
Var unwrap_neighborhood(Tape<T>& tape, Var features, const EdgeTopology& topo) {
  const auto& x = tape.value(features);
  check_width(x, topo);
  const auto C = x.rows(), E = topo.edge_count();
  Tensor<T> out = Tensor<T>::matrix(C * kConvSlots, E);
  for_each_slot(x, topo, [&](std::size_t c, std::size_t e, std::size_t s, T v) {
    out(c * kConvSlots + s, e) = v;
  });
  // The backward closure keeps only the neighbor table, not the topology.
  return tape.record(
      "unwrap_neighborhood", std::move(out), {features},
      [features, neighbors = topo.neighbors, none = topo.sentinel(), C, E](Tape<T>& tp, const Tensor<T>& g) {
        auto* gx = tp.grad_sink(features);
        if (!gx) return;
        const auto& X = tp.value(features);
        for (std::size_t c = 0; c < C; ++c) {
          const auto xr = X.row(c);
          auto gr = gx->row(c);
          const auto g0 = g.row(c * kConvSlots + 0);
          const auto g1 = g.row(c * kConvSlots + 1);
          const auto g2 = g.row(c * kConvSlots + 2);
          const auto g3 = g.row(c * kConvSlots + 3);
          const auto g4 = g.row(c * kConvSlots + 4);
          auto at = [&](EdgeId id) { return id == none ? T{0} : xr[static_cast<std::size_t>(id)]; };
          auto add = [&](EdgeId id, T v) {
            if (id != none) gr[static_cast<std::size_t>(id)] += v;
          };
          for (std::size_t e = 0; e < E; ++e) {
            const auto& nb = neighbors[e];
            gr[e] += g0[e];
            const T s_ac = sign(at(nb[0]) - at(nb[2]));
            const T s_bd = sign(at(nb[1]) - at(nb[3]));
            add(nb[0], g1[e] * s_ac + g2[e]);
            add(nb[2], -g1[e] * s_ac + g2[e]);
            add(nb[1], g3[e] * s_bd + g4[e]);
            add(nb[3], -g3[e] * s_bd + g4[e]);
          }
        }
      });
}

template <typename T>
Var mesh_conv(Tape<T>& tape, Var weights, Var bias, Var features, const EdgeTopology& topo) {
  const auto& w = tape.value(weights);
  const auto& x = tape.value(features);
  if (w.rank() != 3 || w.shape()[2] != kConvSlots || w.shape()[1] != x.rows()) {
    throw ShapeError("mesh_conv: kernel " + shape_string(w.shape()) + " does not accept " +
                     std::to_string(x.rows()) + " input channels");
  }
  const auto out_ch = w.shape()[0];
  const auto in_ch = w.shape()[1];
  const Var unwrapped = unwrap_neighborhood(tape, features, topo);
  const Var w2 = ad::reshape(tape, weights, {out_ch, in_ch * kConvSlots});
  return ad::add_bias(tape, ad::matmul(tape, w2, unwrapped), bias);
}

template <typename T>
Tensor<T> mesh_conv_forward(const ConvKernel<T>& kernel, const Tensor<T>& features, const EdgeTopology& topo) {
  Tape<T> tape;
  const Var w = tape.constant(kernel.weights);
  const Var b = tape.constant(kernel.bias);
  const Var x = tape.constant(features);
  return tape.value(mesh_conv(tape, w, b, x, topo));
}

template Tensor<float> build_symmetric_neighborhood<float>(const Tensor<float>&, const EdgeTopology&);
template Tensor<double> build_symmetric_neighborhood<double>(const Tensor<double>&, const EdgeTopology&);
template Var unwrap_neighborhood<float>(Tape<float>&, Var, const EdgeTopology&);
template Var unwrap_neighborhood<double>(Tape<double>&, Var, const EdgeTopology&);
template Var mesh_conv<float>(Tape<float>&, Var, Var, Var, const EdgeTopology&);
template Var mesh_conv<double>(Tape<double>&, Var, Var, Var, const EdgeTopology&);
template Tensor<float> mesh_conv_forward<float>(const ConvKernel<float>&, const Tensor<float>&, const EdgeTopology&);
template Tensor<double> mesh_conv_forward<double>(const ConvKernel<double>&, const Tensor<double>&, const EdgeTopology&);

}  // namespace meshnet
