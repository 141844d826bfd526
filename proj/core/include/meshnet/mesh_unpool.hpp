#pragma once

#include <memory>
#include <utility>

#include "meshnet/autodiff.hpp"
#include "meshnet/mesh_pool.hpp"

namespace meshnet {

// Each pre-pool edge takes the mean of the pooled edges it was merged into
// (history.parents). Surviving and folded edges copy one parent; a collapsed
// edge averages both sides.
template <typename T>
Tensor<T> unpool_features(const Tensor<T>& pooled, const PoolHistory& history);

template <typename T>
Var mesh_unpool(Tape<T>& tape, Var pooled, std::shared_ptr<const PoolHistory> history);

// Restored topology is the pre-pool snapshot.
template <typename T>
std::pair<EdgeTopology, Tensor<T>> mesh_unpool(const Tensor<T>& pooled, const PoolHistory& history);

}  // namespace meshnet
