#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "meshnet/mesh.hpp"

namespace meshnet {

inline constexpr FaceId kNoFace = -1;

// Edge-centric connectivity of a manifold (possibly bounded) triangle mesh.
//
// Edges are numbered in order of first appearance while walking faces in
// order and each face's half-edges as (v0,v1), (v1,v2), (v2,v0). edges[e]
// stores the endpoints in the direction traversed by edge_faces[e][0].
//
// neighbors[e][0..1] are the other two edges of edge_faces[e][0] in
// counter-clockwise order starting after e, neighbors[e][2..3] likewise for
// edge_faces[e][1]. Missing neighbors of boundary edges hold sentinel(),
// which equals the edge count so that a padded gather indexes a zero row.
struct EdgeTopology {
  std::vector<std::array<VertexId, 2>> edges;
  std::vector<std::array<FaceId, 2>> edge_faces;
  std::vector<std::array<EdgeId, 4>> neighbors;
  std::vector<std::uint8_t> boundary;
  std::vector<std::vector<EdgeId>> vertex_ring;
  std::vector<std::array<EdgeId, 3>> face_edges;

  std::size_t edge_count() const noexcept { return edges.size(); }
  std::size_t face_count() const noexcept { return face_edges.size(); }
  std::size_t vertex_count() const noexcept { return vertex_ring.size(); }
  EdgeId sentinel() const noexcept { return static_cast<EdgeId>(edges.size()); }
  std::size_t boundary_count() const noexcept;

  bool operator==(const EdgeTopology&) const = default;
};

EdgeTopology build_edge_topology(const Mesh& mesh);

// Recomputes neighbors / boundary / vertex_ring from edges, edge_faces and
// face_edges. Used after pooling rewires faces.
void rebuild_neighbors(EdgeTopology& topo, const Mesh& mesh);

// V - E + F.
long euler_characteristic(const Mesh& mesh, const EdgeTopology& topo);

// Full structural check of the topology against its mesh: face/edge
// incidence, 1-2 faces per edge, consistent winding, neighbor convention,
// neighbor symmetry, no duplicate edges or faces. Throws TopologyError.
void validate_topology(const Mesh& mesh, const EdgeTopology& topo);

// Vertices lying on at least one boundary edge.
std::vector<std::uint8_t> boundary_vertices(const EdgeTopology& topo);

}  // namespace meshnet
