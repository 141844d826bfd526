#pragma once

#include <span>
#include <vector>

#include "meshnet/mesh.hpp"
#include "meshnet/tensor.hpp"
#include "meshnet/topology.hpp"

namespace meshnet {

// channels x edges
using EdgeFeatures = Tensor<double>;

inline constexpr std::size_t kInvariantChannels = 5;
inline constexpr std::size_t kMidpointChannels = 3;
inline constexpr double kDegenerateArea = 1e-12;
inline constexpr double kStdFloor = 1e-8;

enum class FeatureMode { kInvariant, kMidpoint };

// Per edge: [dihedral, inner angle lo, inner angle hi, length ratio lo,
// length ratio hi]. Dihedral is pi minus the angle between the two outward
// face normals, so a flat pair reads pi. The inner angle is the one opposite
// the edge in each face; the ratio is |e| over the height of the opposite
// vertex above e. Boundary edges duplicate their only face and read pi.
// Throws TopologyError for a face with area below kDegenerateArea.
EdgeFeatures compute_input_features(const Mesh& mesh, const EdgeTopology& topo);

// Edge midpoints (x, y, z); the position-dependent baseline.
EdgeFeatures compute_midpoint_features(const Mesh& mesh, const EdgeTopology& topo);

EdgeFeatures compute_features(const Mesh& mesh, const EdgeTopology& topo, FeatureMode mode);

struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> std;  // floored at kStdFloor

  bool empty() const noexcept { return mean.empty(); }
  bool operator==(const FeatureStats&) const = default;
};

// Per-channel mean and population standard deviation over every edge of
// every tensor.
FeatureStats fit_stats(std::span<const EdgeFeatures> tensors);
EdgeFeatures apply_stats(const EdgeFeatures& t, const FeatureStats& stats);

}  // namespace meshnet
