#pragma once

#include <array>
#include <vector>

#include "meshnet/mesh.hpp"
#include "meshnet/topology.hpp"

namespace meshnet {

// One edge collapse. For collapsed edge e with neighbors (a, b, c, d) in the
// stored order, the first face merges {a, b, e} into p = a and the second
// face merges {c, d, e} into q = c; b, d and e disappear. The removed vertex
// is folded into the kept one. All ids are pre-pool ids.
struct CollapseRecord {
  EdgeId edge = -1;
  std::array<EdgeId, 3> side1{};  // {a, b, e}
  std::array<EdgeId, 3> side2{};  // {c, d, e}
  EdgeId p = -1;
  EdgeId q = -1;
  std::array<EdgeId, 3> removed{};  // {e, b, d}
  VertexId kept_vertex = -1;
  VertexId removed_vertex = -1;

  bool operator==(const CollapseRecord&) const = default;
};

// Compacted result of a collapse sequence. kept_edges[new_id] is the id the
// edge had before the sequence started.
struct CompactedMesh {
  Mesh mesh;
  EdgeTopology topo;
  std::vector<EdgeId> kept_edges;
};

// Mutable half-edge-like state that supports repeated collapses while keeping
// pre-collapse ids stable. Ids of dead elements are never reused.
class EdgeCollapser {
 public:
  EdgeCollapser(const Mesh& mesh, const EdgeTopology& topo);

  // False for boundary edges, edges whose endpoints are both on the
  // boundary, edges whose endpoint one-rings share more than the two
  // opposite vertices, and collapses that would produce a degenerate or
  // duplicated face.
  bool is_valid(EdgeId e) const;

  // Throws TopologyError when !is_valid(e).
  CollapseRecord collapse(EdgeId e);

  bool alive(EdgeId e) const { return edge_alive_[static_cast<std::size_t>(e)] != 0; }
  std::size_t edge_count() const noexcept { return live_edges_; }
  std::size_t face_count() const noexcept { return live_faces_; }
  std::size_t vertex_count() const noexcept { return live_vertices_; }
  std::size_t original_edge_count() const noexcept { return edges_.size(); }

  CompactedMesh compact() const;

 private:
  bool is_boundary_vertex(VertexId v) const;
  void orient_from_first_face(EdgeId e);

  std::vector<Vec3> positions_;
  std::vector<Face> faces_;
  std::vector<std::array<EdgeId, 3>> face_edges_;
  std::vector<std::array<VertexId, 2>> edges_;
  std::vector<std::array<FaceId, 2>> edge_faces_;
  std::vector<std::vector<EdgeId>> vertex_edges_;
  std::vector<std::uint8_t> vertex_alive_;
  std::vector<std::uint8_t> face_alive_;
  std::vector<std::uint8_t> edge_alive_;
  std::size_t live_vertices_ = 0;
  std::size_t live_faces_ = 0;
  std::size_t live_edges_ = 0;
};

bool is_valid_collapse(const Mesh& mesh, const EdgeTopology& topo, EdgeId e);

}  // namespace meshnet
