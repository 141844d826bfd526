#include "meshnet/mesh_unpool.hpp"

#include <string>

#include "meshnet/error.hpp"

namespace meshnet {
namespace {

template <typename T>
void check_unpool_input(const Tensor<T>& pooled, const PoolHistory& history) {
  if (history.parents.size() != history.original_edge_count()) {
    throw ShapeError("mesh_unpool: history has no parent map for its resolution");
  }
  if (pooled.rank() != 2 || pooled.cols() != history.pooled_edge_count()) {
    throw ShapeError("mesh_unpool: features " + shape_string(pooled.shape()) + " do not match " +
                     std::to_string(history.pooled_edge_count()) + " pooled edges");
  }
}

}  // namespace

template <typename T>
Tensor<T> unpool_features(const Tensor<T>& pooled, const PoolHistory& history) {
  check_unpool_input(pooled, history);
  const auto C = pooled.rows();
  const auto E = history.original_edge_count();
  Tensor<T> out = Tensor<T>::matrix(C, E);
  for (std::size_t c = 0; c < C; ++c) {
    const auto src = pooled.row(c);
    auto dst = out.row(c);
    for (std::size_t e = 0; e < E; ++e) {
      const auto& par = history.parents[e];
      // x0 + mean(xk - x0) keeps a constant input exactly constant.
      const T x0 = src[static_cast<std::size_t>(par[0])];
      T acc{0};
      for (std::size_t k = 1; k < par.size(); ++k) acc += src[static_cast<std::size_t>(par[k])] - x0;
      dst[e] = x0 + acc / static_cast<T>(par.size());
    }
  }
  return out;
}

template <typename T>
Var mesh_unpool(Tape<T>& tape, Var pooled, std::shared_ptr<const PoolHistory> history) {
  Tensor<T> out = unpool_features(tape.value(pooled), *history);
  return tape.record("mesh_unpool", std::move(out), {pooled},
                     [pooled, history = std::move(history)](Tape<T>& tp, const Tensor<T>& g) {
                       auto* gx = tp.grad_sink(pooled);
                       if (!gx) return;
                       const auto E = history->original_edge_count();
                       for (std::size_t c = 0; c < g.rows(); ++c) {
                         const auto src = g.row(c);
                         auto dst = gx->row(c);
                         for (std::size_t e = 0; e < E; ++e) {
                           const auto& par = history->parents[e];
                           const T share = src[e] / static_cast<T>(par.size());
                           for (auto p : par) dst[static_cast<std::size_t>(p)] += share;
                         }
                       }
                     });
}

template <typename T>
std::pair<EdgeTopology, Tensor<T>> mesh_unpool(const Tensor<T>& pooled, const PoolHistory& history) {
  return {history.topo_before, unpool_features(pooled, history)};
}

template Tensor<float> unpool_features<float>(const Tensor<float>&, const PoolHistory&);
template Tensor<double> unpool_features<double>(const Tensor<double>&, const PoolHistory&);
template Var mesh_unpool<float>(Tape<float>&, Var, std::shared_ptr<const PoolHistory>);
template Var mesh_unpool<double>(Tape<double>&, Var, std::shared_ptr<const PoolHistory>);
template std::pair<EdgeTopology, Tensor<float>> mesh_unpool<float>(const Tensor<float>&, const PoolHistory&);
template std::pair<EdgeTopology, Tensor<double>> mesh_unpool<double>(const Tensor<double>&, const PoolHistory&);

}  // namespace meshnet
