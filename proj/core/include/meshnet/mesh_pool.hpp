#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "meshnet/autodiff.hpp"
#include "meshnet/collapse.hpp"
#include "meshnet/mesh.hpp"
#include "meshnet/topology.hpp"

namespace meshnet {

enum class PoolMode { kByNorm, kRandom };

// Everything needed to undo one pooling layer.
struct PoolHistory {
  Mesh mesh_before;
  EdgeTopology topo_before;
  std::vector<CollapseRecord> records;
  // pooled id -> pre-pool id of the surviving edge.
  std::vector<EdgeId> pooled_to_original;
  // pre-pool id -> pooled edges it was merged into, sorted. Edges that
  // survive or fold into one side have a single entry; a collapsed edge gets
  // the union of both sides' entries.
  std::vector<std::vector<EdgeId>> parents;

  std::size_t original_edge_count() const noexcept { return topo_before.edge_count(); }
  std::size_t pooled_edge_count() const noexcept { return pooled_to_original.size(); }
};

struct PoolPlan {
  Mesh mesh;
  EdgeTopology topo;
  std::shared_ptr<const PoolHistory> history;
};

// L2 norm of each feature column.
template <typename T>
std::vector<double> edge_priority(const Tensor<T>& features);

// Collapses edges in ascending score order (ties: lower id first) until the
// edge count is <= target_edges. Scores are fixed for the whole call; an
// edge that is not collapsible when popped is deferred and retried after
// other collapses have changed its neighborhood. Throws DataError if no
// valid collapse remains before the target is reached.
PoolPlan plan_pool(const Mesh& mesh, const EdgeTopology& topo, const std::vector<double>& scores,
                   std::size_t target_edges);

// Scores for PoolMode::kRandom: a seeded random permutation rank per edge.
std::vector<double> random_scores(std::size_t edge_count, std::uint64_t seed);

// Simplifies a mesh to at most target_edges by collapsing edges in a seeded
// random order. Geometry plays no part in the choice, so this is only meant
// for bringing external meshes to a network's input resolution.
PoolPlan decimate(const Mesh& mesh, const EdgeTopology& topo, std::size_t target_edges, std::uint64_t seed = 0);

// Applies the recorded merges to pre-pool features: p = mean(a, b, e),
// q = mean(c, d, e) in record order, then keeps the surviving columns.
template <typename T>
Tensor<T> merge_pooled_features(const Tensor<T>& features, const PoolHistory& history);

// Differentiable version of merge_pooled_features.
template <typename T>
Var pool_features(Tape<T>& tape, Var features, std::shared_ptr<const PoolHistory> history);

template <typename T>
struct PoolResult {
  Mesh mesh;
  EdgeTopology topo;
  Tensor<T> features;
  std::shared_ptr<const PoolHistory> history;
};

template <typename T>
PoolResult<T> mesh_pool(const Mesh& mesh, const EdgeTopology& topo, const Tensor<T>& features,
                        std::size_t target_edges, PoolMode mode = PoolMode::kByNorm, std::uint64_t seed = 0);

template <typename T>
struct CollapseResult {
  Mesh mesh;
  EdgeTopology topo;
  Tensor<T> features;
  CollapseRecord record;
  std::vector<EdgeId> kept_edges;
};

// Single collapse with compaction. Throws TopologyError if invalid.
template <typename T>
CollapseResult<T> collapse_edge(const Mesh& mesh, const EdgeTopology& topo, const Tensor<T>& features, EdgeId edge);

// Re-applies the records to the snapshot; yields the pooled mesh/topology.
CompactedMesh replay_history(const PoolHistory& history);

}  // namespace meshnet
